use std::collections::{BTreeMap, HashSet};

use super::{
    Analysis, Body, Circuit, Device, Element, Instance, Model, ModelKind, NetlistError, Source,
    Subckt,
};

/// Parses a number with an optional engineering suffix (`f p n u m k meg g t`).
/// Letters after the suffix are treated as a unit and ignored, as in SPICE.
pub fn parse_value(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let digits_start = end;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end < bytes.len() && bytes[end] == b'.' {
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
    }
    if end == digits_start || (end == digits_start + 1 && bytes[digits_start] == b'.') {
        return None;
    }
    // exponent only when followed by a digit, so "1e" stays malformed
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if k < bytes.len() && bytes[k].is_ascii_digit() {
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            end = k;
        }
    }
    let mantissa: f64 = text[..end].parse().ok()?;
    let rest = text[end..].to_ascii_lowercase();
    if !rest.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    let scale = if rest.starts_with("meg") {
        1e6
    } else {
        match rest.chars().next() {
            None => 1.0,
            Some('f') => 1e-15,
            Some('p') => 1e-12,
            Some('n') => 1e-9,
            Some('u') => 1e-6,
            Some('m') => 1e-3,
            Some('k') => 1e3,
            Some('g') => 1e9,
            Some('t') => 1e12,
            // bare unit such as "v" or "s"
            Some(_) => 1.0,
        }
    };
    Some(mantissa * scale)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Eq,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize_line(text: &str, line: usize, out: &mut Vec<Token>) {
    let mut word = String::new();
    let mut word_col = 0;
    let flush = |word: &mut String, col: usize, out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token {
                tok: Tok::Word(std::mem::take(word)),
                line,
                column: col,
            });
        }
    };
    for (i, c) in text.char_indices() {
        let column = i + 1;
        match c {
            c if c.is_whitespace() || c == ',' => flush(&mut word, word_col, out),
            '=' | '(' | ')' => {
                flush(&mut word, word_col, out);
                let tok = match c {
                    '=' => Tok::Eq,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Token { tok, line, column });
            }
            c => {
                if word.is_empty() {
                    word_col = column;
                }
                word.push(c);
            }
        }
    }
    flush(&mut word, word_col, out);
}

/// Joins `+` continuations and strips comments, keeping source positions.
fn logical_lines(text: &str) -> Vec<Vec<Token>> {
    let mut cards: Vec<Vec<Token>> = Vec::new();
    for (idx, raw) in text.lines().enumerate().skip(1) {
        let line = idx + 1;
        let content = match raw.find(';') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = content.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if let Some(cont) = trimmed.strip_prefix('+') {
            let offset = content.len() - cont.len();
            let mut toks = Vec::new();
            tokenize_line(cont, line, &mut toks);
            for t in &mut toks {
                t.column += offset;
            }
            match cards.last_mut() {
                Some(card) => card.extend(toks),
                None => cards.push(toks),
            }
            continue;
        }
        let mut toks = Vec::new();
        tokenize_line(content, line, &mut toks);
        cards.push(toks);
    }
    cards
}

/// A card split into positional words and `key=value` parameters.
struct Card {
    line: usize,
    name: String,
    positional: Vec<Token>,
    params: Vec<(String, Token)>,
    pwl: Option<Vec<Token>>,
}

fn syntax(t: &Token, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line: t.line,
        column: t.column,
        message: message.into(),
    }
}

fn word(t: &Token) -> &str {
    match &t.tok {
        Tok::Word(w) => w,
        _ => "",
    }
}

fn number(t: &Token) -> Result<f64, NetlistError> {
    parse_value(word(t)).ok_or_else(|| NetlistError::Number {
        line: t.line,
        column: t.column,
        text: word(t).to_string(),
    })
}

fn split_card(tokens: Vec<Token>) -> Result<Card, NetlistError> {
    let line = tokens[0].line;
    let name = match &tokens[0].tok {
        Tok::Word(w) => w.clone(),
        _ => return Err(syntax(&tokens[0], "expected a card name")),
    };
    let mut positional = Vec::new();
    let mut params = Vec::new();
    let mut pwl = None;
    let mut i = 1;
    while i < tokens.len() {
        let t = &tokens[i];
        match &t.tok {
            Tok::Word(w) if w.eq_ignore_ascii_case("pwl") => {
                let open = tokens
                    .get(i + 1)
                    .filter(|n| n.tok == Tok::LParen)
                    .ok_or_else(|| syntax(t, "expected '(' after PWL"))?;
                let mut points = Vec::new();
                let mut j = i + 2;
                loop {
                    match tokens.get(j) {
                        Some(Token { tok: Tok::RParen, .. }) => break,
                        Some(tk @ Token { tok: Tok::Word(_), .. }) => points.push(tk.clone()),
                        Some(other) => return Err(syntax(other, "unexpected token in PWL list")),
                        None => return Err(syntax(open, "unterminated PWL list")),
                    }
                    j += 1;
                }
                pwl = Some(points);
                i = j + 1;
            }
            Tok::Word(w) => {
                if tokens.get(i + 1).map(|n| &n.tok) == Some(&Tok::Eq) {
                    let value = tokens
                        .get(i + 2)
                        .filter(|v| matches!(v.tok, Tok::Word(_)))
                        .ok_or_else(|| syntax(&tokens[i + 1], "expected value after '='"))?;
                    params.push((w.to_ascii_lowercase(), value.clone()));
                    i += 3;
                } else {
                    if !params.is_empty() {
                        return Err(syntax(t, "positional field after parameters"));
                    }
                    positional.push(t.clone());
                    i += 1;
                }
            }
            _ => return Err(syntax(t, "unexpected punctuation")),
        }
    }
    Ok(Card {
        line,
        name,
        positional,
        params,
        pwl,
    })
}

struct Scope {
    name: Option<Subckt>,
    body: Body,
    names: HashSet<String>,
}

impl Scope {
    fn claim(&mut self, name: &str, line: usize) -> Result<(), NetlistError> {
        if !self.names.insert(name.to_string()) {
            return Err(NetlistError::Duplicate {
                line,
                name: name.to_string(),
            });
        }
        Ok(())
    }
}

fn arity(card: &Card, expected: &str) -> NetlistError {
    NetlistError::Arity {
        line: card.line,
        name: card.name.clone(),
        expected: expected.to_string(),
        found: card.positional.len(),
    }
}

fn reject_params(card: &Card, allowed: &[&str]) -> Result<(), NetlistError> {
    for (k, t) in &card.params {
        if !allowed.contains(&k.as_str()) {
            return Err(syntax(t, format!("unknown parameter '{k}' for {}", card.name)));
        }
    }
    Ok(())
}

fn param(card: &Card, key: &str) -> Result<Option<f64>, NetlistError> {
    card.params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, t)| number(t))
        .transpose()
}

fn words(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| word(t).to_string()).collect()
}

fn parse_device(card: &Card) -> Result<Device, NetlistError> {
    let prefix = card.name.chars().next().unwrap_or(' ').to_ascii_uppercase();
    if card.pwl.is_some() && prefix != 'V' {
        return Err(arity(card, "no PWL list"));
    }
    let nodes = |n: usize| words(&card.positional[..n]);
    let element = match prefix {
        'R' => {
            if card.positional.len() != 3 {
                return Err(arity(card, "2 nodes and a value"));
            }
            reject_params(card, &[])?;
            Element::Resistor {
                resistance: number(&card.positional[2])?,
            }
        }
        'C' => {
            if card.positional.len() != 3 {
                return Err(arity(card, "2 nodes and a value"));
            }
            reject_params(card, &["ic"])?;
            Element::Capacitor {
                capacitance: number(&card.positional[2])?,
                ic: param(card, "ic")?,
            }
        }
        'V' => {
            reject_params(card, &[])?;
            let source = match (&card.pwl, card.positional.len()) {
                (Some(points), 2) => {
                    if points.len() % 2 != 0 {
                        return Err(syntax(&points[points.len() - 1], "PWL needs time/value pairs"));
                    }
                    let mut pairs = Vec::with_capacity(points.len() / 2);
                    for pair in points.chunks(2) {
                        let t = number(&pair[0])?;
                        if let Some(&(prev, _)) = pairs.last() {
                            if t < prev {
                                return Err(syntax(&pair[0], "PWL times must be non-decreasing"));
                            }
                        }
                        pairs.push((t, number(&pair[1])?));
                    }
                    Source::Pwl(pairs)
                }
                (None, 4) if word(&card.positional[2]).eq_ignore_ascii_case("dc") => {
                    Source::Dc(number(&card.positional[3])?)
                }
                (None, 3) => Source::Dc(number(&card.positional[2])?),
                _ => return Err(arity(card, "2 nodes and DC <value> or PWL(...)")),
            };
            Element::VSource(source)
        }
        'Y' => {
            if card.positional.len() != 3 {
                return Err(arity(card, "2 nodes and a model"));
            }
            reject_params(card, &["x0", "polarity"])?;
            let x0 = param(card, "x0")?;
            if let Some(x) = x0 {
                if !(0.0..=1.0).contains(&x) {
                    let t = &card.params.iter().find(|(k, _)| k == "x0").unwrap().1;
                    return Err(syntax(t, "x0 must lie in [0, 1]"));
                }
            }
            let polarity = match param(card, "polarity")? {
                None => 1,
                Some(p) if p == 1.0 => 1,
                Some(p) if p == -1.0 => -1,
                Some(_) => {
                    let t = &card.params.iter().find(|(k, _)| k == "polarity").unwrap().1;
                    return Err(syntax(t, "polarity must be 1 or -1"));
                }
            };
            Element::Memristor {
                model: word(&card.positional[2]).to_string(),
                x0,
                polarity,
            }
        }
        'M' => {
            if card.positional.len() != 5 {
                return Err(arity(card, "4 nodes and a model"));
            }
            reject_params(card, &[])?;
            Element::Mosfet {
                model: word(&card.positional[4]).to_string(),
            }
        }
        _ => {
            return Err(NetlistError::UnknownDevice {
                line: card.line,
                prefix,
                name: card.name.clone(),
            })
        }
    };
    let terminal_count = match element {
        Element::Mosfet { .. } => 4,
        _ => 2,
    };
    Ok(Device {
        name: card.name.clone(),
        terminals: nodes(terminal_count),
        element,
    })
}

/// Parses netlist text. The first line is always the title.
pub fn parse(text: &str) -> Result<Circuit, NetlistError> {
    let title = text.lines().next().unwrap_or("").trim().to_string();
    let mut circuit = Circuit {
        title,
        ..Default::default()
    };
    let mut top = Scope {
        name: None,
        body: Body::default(),
        names: HashSet::new(),
    };
    let mut open: Option<Scope> = None;

    for tokens in logical_lines(text) {
        let first = tokens[0].clone();
        let card = split_card(tokens)?;
        let lower = card.name.to_ascii_lowercase();
        if lower.starts_with('.') {
            match lower.as_str() {
                ".end" => break,
                ".model" => {
                    if card.positional.len() != 2 {
                        return Err(arity(&card, "a name and a kind"));
                    }
                    let name = word(&card.positional[0]).to_string();
                    let kind = match word(&card.positional[1]).to_ascii_lowercase().as_str() {
                        "memristor" => ModelKind::Memristor,
                        "nmos" => ModelKind::Nmos,
                        "pmos" => ModelKind::Pmos,
                        _ => return Err(syntax(&card.positional[1], "model kind must be memristor, nmos or pmos")),
                    };
                    if circuit.models.contains_key(&name) {
                        return Err(NetlistError::Duplicate { line: card.line, name });
                    }
                    let mut params = BTreeMap::new();
                    for (k, t) in &card.params {
                        params.insert(k.clone(), number(t)?);
                    }
                    circuit.models.insert(name.clone(), Model { name, kind, params });
                }
                ".subckt" => {
                    if open.is_some() {
                        return Err(syntax(&first, "nested .subckt definitions are not supported"));
                    }
                    if card.positional.is_empty() {
                        return Err(arity(&card, "a subcircuit name"));
                    }
                    let name = word(&card.positional[0]).to_string();
                    if circuit.subckts.contains_key(&name) {
                        return Err(NetlistError::Duplicate { line: card.line, name });
                    }
                    open = Some(Scope {
                        name: Some(Subckt {
                            name,
                            ports: words(&card.positional[1..]),
                            body: Body::default(),
                        }),
                        body: Body::default(),
                        names: HashSet::new(),
                    });
                }
                ".ends" => {
                    let scope = open.take().ok_or_else(|| syntax(&first, ".ends without .subckt"))?;
                    let mut sub = scope.name.expect("subckt scope");
                    sub.body = scope.body;
                    circuit.subckts.insert(sub.name.clone(), sub);
                }
                ".tran" => {
                    if card.positional.len() != 2 {
                        return Err(arity(&card, "tstep and tstop"));
                    }
                    let tstep = number(&card.positional[0])?;
                    let tstop = number(&card.positional[1])?;
                    if !(tstep > 0.0 && tstep <= tstop) {
                        return Err(syntax(&card.positional[0], "require 0 < tstep <= tstop"));
                    }
                    circuit.analyses.push(Analysis::Tran { tstep, tstop });
                }
                _ => return Err(syntax(&first, format!("unknown control card '{}'", card.name))),
            }
            continue;
        }

        let scope = open.as_mut().unwrap_or(&mut top);
        scope.claim(&card.name, card.line)?;
        if card.name.starts_with(['X', 'x']) {
            if card.positional.len() < 2 || !card.params.is_empty() || card.pwl.is_some() {
                return Err(arity(&card, "ports and a subcircuit name"));
            }
            let n = card.positional.len();
            scope.body.instances.push(Instance {
                name: card.name.clone(),
                ports: words(&card.positional[..n - 1]),
                subckt: word(&card.positional[n - 1]).to_string(),
            });
        } else {
            let device = parse_device(&card)?;
            scope.body.devices.push(device);
        }
    }
    if let Some(scope) = open {
        let name = scope.name.map(|s| s.name).unwrap_or_default();
        return Err(NetlistError::Syntax {
            line: text.lines().count(),
            column: 1,
            message: format!("subcircuit '{name}' is missing .ends"),
        });
    }
    circuit.top = top.body;
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::DeviceKind;

    #[test]
    fn values_with_suffixes() {
        assert_eq!(parse_value("1k"), Some(1e3));
        assert_eq!(parse_value("1meg"), Some(1e6));
        assert_eq!(parse_value("1MEG"), Some(1e6));
        assert_eq!(parse_value("2.5m"), Some(2.5e-3));
        assert_eq!(parse_value("10ps"), Some(10e-12));
        assert_eq!(parse_value("1e-9"), Some(1e-9));
        assert_eq!(parse_value("-3.3V"), Some(-3.3));
        assert_eq!(parse_value(".5u"), Some(0.5e-6));
        assert_eq!(parse_value("4f"), Some(4e-15));
        assert_eq!(parse_value("1g"), Some(1e9));
        assert_eq!(parse_value("abc"), None);
        assert_eq!(parse_value("1k5"), None);
        assert_eq!(parse_value("."), None);
    }

    #[test]
    fn single_resistor() {
        let c = parse("t\nR1 a 0 1k\n.end").unwrap();
        assert_eq!(c.title, "t");
        assert_eq!(c.top.devices.len(), 1);
        let r = &c.top.devices[0];
        assert_eq!(r.kind(), DeviceKind::Resistor);
        assert_eq!(r.terminals, vec!["a", "0"]);
        assert_eq!(r.element, Element::Resistor { resistance: 1000.0 });
    }

    #[test]
    fn memristor_with_model() {
        let c = parse("t\n.model MRMOD memristor r_on=1k r_off=1meg\nYM1 in out MRMOD x0=0.2\n.end").unwrap();
        let y = &c.top.devices[0];
        assert_eq!(y.kind(), DeviceKind::Memristor);
        assert_eq!(
            y.element,
            Element::Memristor {
                model: "MRMOD".into(),
                x0: Some(0.2),
                polarity: 1
            }
        );
        let m = &c.models["MRMOD"];
        assert_eq!(m.params["r_off"], 1e6);
    }

    #[test]
    fn arity_error_names_line() {
        let err = parse("t\nR1 a 0\n.end").unwrap_err();
        match err {
            NetlistError::Arity { line, ref name, .. } => {
                assert_eq!(line, 2);
                assert_eq!(name, "R1");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().starts_with("line 2"));
    }

    #[test]
    fn continuation_comments_and_case() {
        let text = "title * not a comment here\n* comment\nV1 in 0 pwl(0 0\n+ 1n 1) ; trailing\nr2 in 0 1K\n.TRAN 1p 2n\n.END\nR9 garbage";
        let c = parse(text).unwrap();
        assert_eq!(c.top.devices.len(), 2);
        assert_eq!(
            c.top.devices[0].element,
            Element::VSource(Source::Pwl(vec![(0.0, 0.0), (1e-9, 1.0)]))
        );
        assert_eq!(c.tran(), Some((1e-12, 2e-9)));
    }

    #[test]
    fn sources_and_caps() {
        let c = parse("t\nV1 a 0 DC 1.2\nV2 b 0 0.5\nC1 a b 1p ic=0.3\nM1 d g 0 0 nch\n.end").unwrap();
        assert_eq!(c.top.devices[0].element, Element::VSource(Source::Dc(1.2)));
        assert_eq!(c.top.devices[1].element, Element::VSource(Source::Dc(0.5)));
        assert_eq!(
            c.top.devices[2].element,
            Element::Capacitor { capacitance: 1e-12, ic: Some(0.3) }
        );
        assert_eq!(c.top.devices[3].terminals, vec!["d", "g", "0", "0"]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse("t\nQ1 a b c\n"), Err(NetlistError::UnknownDevice { prefix: 'Q', .. })));
        assert!(matches!(parse("t\nR1 a 0 1k\nR1 b 0 1k\n"), Err(NetlistError::Duplicate { line: 3, .. })));
        assert!(matches!(parse("t\nR1 a 0 1kx!\n"), Err(NetlistError::Number { line: 2, column: 8, .. })));
        assert!(matches!(parse("t\nV1 a 0 PWL(0 1 2\n"), Err(NetlistError::Syntax { .. })));
        assert!(matches!(parse("t\n.subckt s a\nR1 a 0 1\n"), Err(NetlistError::Syntax { .. })));
        assert!(matches!(parse("t\n.foo\n"), Err(NetlistError::Syntax { line: 2, .. })));
        assert!(matches!(parse("t\nY1 a b m polarity=2\n"), Err(NetlistError::Syntax { .. })));
        assert!(matches!(parse("t\nM1 a b c m\n"), Err(NetlistError::Arity { .. })));
    }

    #[test]
    fn subckt_scopes_are_separate() {
        let text = "t\n.subckt pair a b\nY1 a m mr\nY2 m b mr\n.ends\nY1 x y mr\nX1 x y pair\n.end";
        let c = parse(text).unwrap();
        assert_eq!(c.subckts["pair"].ports, vec!["a", "b"]);
        assert_eq!(c.subckts["pair"].body.devices.len(), 2);
        assert_eq!(c.top.instances[0].subckt, "pair");
    }
}
