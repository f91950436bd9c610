//! The `13a` tokenizer (mteval-v13a rules as used by WMT).

use std::sync::OnceLock;

use regex::Regex;

struct Rules {
    symbols: Regex,
    period_comma_after_non_digit: Regex,
    period_comma_before_non_digit: Regex,
    dash_after_digit: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        symbols: Regex::new(r"([\{-~\[-`\x20-&\(-\+:-@/])").unwrap(),
        period_comma_after_non_digit: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_comma_before_non_digit: Regex::new(r"([\.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

/// Whitespace as understood by Python's `str.split()`: Unicode White_Space
/// plus the ASCII information separators U+001C..U+001F.
pub(crate) fn is_split_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

pub(crate) fn split_tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_split_space).filter(|t| !t.is_empty())
}

/// Tokenizes one segment into `13a` tokens.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let r = rules();
    let line = format!(" {line} ");
    let line = r.symbols.replace_all(&line, " ${1} ");
    let line = r.period_comma_after_non_digit.replace_all(&line, "${1} ${2} ");
    let line = r.period_comma_before_non_digit.replace_all(&line, " ${1} ${2}");
    let line = r.dash_after_digit.replace_all(&line, "${1} ${2} ");
    split_tokens(&line).map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize_13a("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(tokenize_13a("3.5"), ["3.5"]);
        assert!(tokenize_13a("").is_empty());
        assert_eq!(tokenize_13a("1990-2000"), ["1990", "-", "2000"]);
        assert_eq!(tokenize_13a("a-b"), ["a-b"]);
    }
}
