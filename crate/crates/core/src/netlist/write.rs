use std::fmt::{self, Write as _};

use super::{Analysis, Body, Circuit, Element, Source};

/// Formats a number so that [`super::parse_value`] reads back the identical `f64`.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &Body) -> fmt::Result {
    for d in &body.devices {
        let nodes = d.terminals.join(" ");
        match &d.element {
            Element::Resistor { resistance } => {
                writeln!(f, "{} {} {}", d.name, nodes, format_value(*resistance))?
            }
            Element::Capacitor { capacitance, ic } => {
                write!(f, "{} {} {}", d.name, nodes, format_value(*capacitance))?;
                if let Some(ic) = ic {
                    write!(f, " ic={}", format_value(*ic))?;
                }
                writeln!(f)?;
            }
            Element::VSource(Source::Dc(v)) => {
                writeln!(f, "{} {} DC {}", d.name, nodes, format_value(*v))?
            }
            Element::VSource(Source::Pwl(points)) => {
                let mut list = String::new();
                for (i, (t, v)) in points.iter().enumerate() {
                    if i > 0 {
                        list.push(' ');
                    }
                    let _ = write!(list, "{} {}", format_value(*t), format_value(*v));
                }
                writeln!(f, "{} {} PWL({})", d.name, nodes, list)?
            }
            Element::Memristor { model, x0, polarity } => {
                write!(f, "{} {} {}", d.name, nodes, model)?;
                if let Some(x0) = x0 {
                    write!(f, " x0={}", format_value(*x0))?;
                }
                if *polarity != 1 {
                    write!(f, " polarity={polarity}")?;
                }
                writeln!(f)?;
            }
            Element::Mosfet { model } => writeln!(f, "{} {} {}", d.name, nodes, model)?,
        }
    }
    for inst in &body.instances {
        writeln!(f, "{} {} {}", inst.name, inst.ports.join(" "), inst.subckt)?;
    }
    Ok(())
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        for m in self.models.values() {
            write!(f, ".model {} {}", m.name, m.kind.keyword())?;
            for (k, v) in &m.params {
                write!(f, " {}={}", k, format_value(*v))?;
            }
            writeln!(f)?;
        }
        for s in self.subckts.values() {
            if s.ports.is_empty() {
                writeln!(f, ".subckt {}", s.name)?;
            } else {
                writeln!(f, ".subckt {} {}", s.name, s.ports.join(" "))?;
            }
            write_body(f, &s.body)?;
            writeln!(f, ".ends {}", s.name)?;
        }
        write_body(f, &self.top)?;
        for a in &self.analyses {
            match a {
                Analysis::Tran { tstep, tstop } => {
                    writeln!(f, ".tran {} {}", format_value(*tstep), format_value(*tstop))?
                }
            }
        }
        writeln!(f, ".end")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse, parse_value};
    use proptest::prelude::*;

    #[test]
    fn round_trip_fixture() {
        let text = "fixture\n.model mr memristor r_on=1k r_off=1meg\n.subckt and2 a b y\nY1 a y mr polarity=-1\nY2 y b mr x0=0.25\n.ends\nV1 a 0 PWL(0 0 10p 1 1n 1)\nV2 b 0 DC 1\nC1 y 0 1f ic=0\nX1 a b y and2\n.tran 1p 1n\n.end\n";
        let first = parse(text).unwrap();
        let again = parse(&first.to_string()).unwrap();
        assert_eq!(first, again);
    }

    proptest! {
        #[test]
        fn formatted_values_parse_back(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(parse_value(&format_value(v)), Some(v));
        }
    }
}
