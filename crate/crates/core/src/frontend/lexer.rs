use num_bigint::BigInt;

use super::ast::Span;
use super::FrontendError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    Str(String),
    /// Punctuation, normalized to its ASCII spelling.
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest spellings first.
const SYMBOLS: &[(&str, &str)] = &[
    ("==>", "->"),
    (":=", ":="),
    ("~~", "~"),
    ("<=", "<="),
    (">=", ">="),
    ("==", "="),
    ("!=", "!="),
    ("<>", "!="),
    ("&&", "&&"),
    ("||", "||"),
    ("/\\", "&&"),
    ("\\/", "||"),
    ("->", "->"),
    ("=>", "->"),
    ("..", ".."),
    ("≠", "!="),
    ("≤", "<="),
    ("≥", ">="),
    ("∧", "&&"),
    ("∨", "||"),
    ("¬", "!"),
    ("⟹", "->"),
    ("⇒", "->"),
    ("→", "->"),
    ("~", "~"),
    ("(", "("),
    (")", ")"),
    ("[", "["),
    ("]", "]"),
    ("{", "{"),
    ("}", "}"),
    (",", ","),
    (";", ";"),
    (":", ":"),
    ("+", "+"),
    ("-", "-"),
    ("−", "-"),
    ("*", "*"),
    ("·", "*"),
    ("/", "/"),
    ("^", "^"),
    ("<", "<"),
    (">", ">"),
    ("=", "="),
    ("!", "!"),
    ("|", "|"),
];

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == 'π'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenize `src`. `#` and `//` start comments running to the end of line.
pub fn lex(src: &str) -> Result<Vec<Token>, FrontendError> {
    lex_at(src, 1, 1)
}

/// Tokenize with positions offset to `(line, col)` of the first character.
pub fn lex_at(src: &str, line0: usize, col0: usize) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (line0, col0);
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let span = Span { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            k += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            k += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(k + 1) == Some(&'/')) {
            while k < chars.len() && chars[k] != '\n' {
                k += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = k;
            while k < chars.len() && chars[k].is_ascii_digit() {
                k += 1;
            }
            let text: String = chars[start..k].iter().collect();
            col += k - start;
            out.push(Token { tok: Tok::Int(text.parse().unwrap()), span });
            continue;
        }
        if ident_start(c) {
            let start = k;
            k += 1;
            while k < chars.len() && ident_char(chars[k]) {
                k += 1;
            }
            let mut text: String = chars[start..k].iter().collect();
            col += k - start;
            if let Some(rest) = text.strip_prefix('π') {
                text = format!("pi{rest}");
            }
            out.push(Token { tok: Tok::Ident(text), span });
            continue;
        }
        if c == '"' {
            let start = k + 1;
            k += 1;
            while k < chars.len() && chars[k] != '"' && chars[k] != '\n' {
                k += 1;
            }
            if k >= chars.len() || chars[k] != '"' {
                return Err(FrontendError::syntax(span, "unterminated string literal"));
            }
            let text: String = chars[start..k].iter().collect();
            k += 1;
            col += k - start + 1;
            out.push(Token { tok: Tok::Str(text), span });
            continue;
        }
        let rest = &chars[k..];
        let hit = SYMBOLS.iter().find(|(spelling, _)| {
            let s: Vec<char> = spelling.chars().collect();
            rest.len() >= s.len() && rest[..s.len()] == s[..]
        });
        match hit {
            Some((spelling, norm)) => {
                let n = spelling.chars().count();
                k += n;
                col += n;
                out.push(Token { tok: Tok::Sym(norm), span });
            }
            None => return Err(FrontendError::syntax(span, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn unicode_and_ascii_spellings_agree() {
        assert_eq!(toks("z ≠ 0 ∧ ¬a"), toks("z != 0 && !a"));
        assert_eq!(toks("a \\/ b /\\ c"), toks("a || b && c"));
        assert_eq!(toks("s ~~ d"), toks("s ~ d"));
        assert_eq!(toks("π_11(s)"), toks("pi_11(s)"));
    }

    #[test]
    fn comments_and_positions() {
        let ts = lex("x[0] := 0; // init\n# note\n  y").unwrap();
        let y = ts.iter().find(|t| t.tok == Tok::Ident("y".into())).unwrap();
        assert_eq!(y.span, Span { line: 3, col: 3 });
    }

    #[test]
    fn division_is_not_conjunction() {
        assert_eq!(toks("1/2"), vec![Tok::Int(1.into()), Tok::Sym("/"), Tok::Int(2.into()), Tok::Eof]);
    }

    #[test]
    fn bad_character() {
        let e = lex("x @ y").unwrap_err();
        assert_eq!(e.span(), Span { line: 1, col: 3 });
    }
}
