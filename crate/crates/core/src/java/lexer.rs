use super::{JavaError, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TokKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub span: Span,
}

const OPERATORS: [&str; 25] = [
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
];

const SINGLE: &[u8] = b"(){}[];,.=<>!~?:+-*/&|^%@";

#[derive(Debug)]
pub(crate) struct Lexed {
    pub tokens: Vec<Token>,
    pub comments: Vec<Span>,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

pub(crate) fn lex(path: &str, text: &str) -> Result<Lexed, JavaError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    let mut i = 0;
    let err = |at: usize, msg: &str| JavaError::syntax(path, text, at, msg);
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            // keep a trailing `\r` outside the comment
            let end = if i > start && bytes[i - 1] == b'\r' { i - 1 } else { i };
            comments.push(Span::new(start, end));
            continue;
        }
        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match text[i + 2..].find("*/") {
                Some(rel) => i = i + 2 + rel + 2,
                None => return Err(err(start, "unterminated block comment")),
            }
            comments.push(Span::new(start, i));
            continue;
        }
        let c = text[i..].chars().next().unwrap();
        let kind = if is_ident_start(c) {
            for ch in text[i..].chars() {
                if !is_ident_part(ch) {
                    break;
                }
                i += ch.len_utf8();
            }
            TokKind::Ident
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let hex = bytes[start..].starts_with(b"0x") || bytes[start..].starts_with(b"0X");
            while i < bytes.len() {
                let d = bytes[i];
                // in hex literals `e` is a digit; only `p` starts an exponent
                let prev = if i > start { bytes[i - 1] } else { 0 };
                let exponent = matches!(prev, b'p' | b'P') || (!hex && matches!(prev, b'e' | b'E'));
                if d.is_ascii_alphanumeric() || d == b'_' || d == b'.' || ((d == b'+' || d == b'-') && exponent) {
                    i += 1;
                } else {
                    break;
                }
            }
            TokKind::Number
        } else if text[i..].starts_with("\"\"\"") {
            match text[i + 3..].find("\"\"\"") {
                Some(rel) => i = i + 3 + rel + 3,
                None => return Err(err(start, "unterminated text block")),
            }
            TokKind::Str
        } else if b == b'"' || b == b'\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(err(start, if b == b'"' { "unterminated string literal" } else { "unterminated character literal" }))
                    }
                    Some(b'\\') => i += 2,
                    Some(&q) if q == b => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            if b == b'"' { TokKind::Str } else { TokKind::Char }
        } else if let Some(op) = OPERATORS.iter().find(|op| text[i..].starts_with(**op)) {
            i += op.len();
            TokKind::Punct
        } else if SINGLE.contains(&b) {
            i += 1;
            TokKind::Punct
        } else {
            return Err(err(start, &format!("unexpected character `{c}`")));
        };
        tokens.push(Token { kind, span: Span::new(start, i) });
    }
    Ok(Lexed { tokens, comments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex("T.java", src).unwrap().tokens.iter().map(|t| src[t.span.range()].to_string()).collect()
    }

    #[test]
    fn tokens_and_comments() {
        let src = "int x = a++ >>= 3; // tail\n/* block */ s = \"a\\\"b\"; c = '\\'';";
        let lexed = lex("T.java", src).unwrap();
        assert_eq!(lexed.comments.len(), 2);
        assert_eq!(&src[lexed.comments[0].range()], "// tail");
        assert_eq!(
            texts(src),
            ["int", "x", "=", "a", "++", ">>=", "3", ";", "s", "=", "\"a\\\"b\"", ";", "c", "=", "'\\''", ";"]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(texts("1.5e-3f + 0x1F - .5 + 1_000L"), ["1.5e-3f", "+", "0x1F", "-", ".5", "+", "1_000L"]);
        assert_eq!(texts("0x1E+5 - 0x1p-3"), ["0x1E", "+", "5", "-", "0x1p-3"]);
    }

    #[test]
    fn unterminated() {
        assert!(lex("T.java", "/* open").is_err());
        assert!(lex("T.java", "s = \"open\n").is_err());
        let e = lex("T.java", "a\n  `").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
    }
}
