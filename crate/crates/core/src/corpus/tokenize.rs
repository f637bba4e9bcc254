/// Whitespace and punctuation tokenizer.
///
/// Whitespace separates tokens. Any character that is neither alphanumeric
/// nor whitespace is emitted as a token of its own, so `"(EMP)"` becomes
/// `["(", "EMP", ")"]`. Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    tokenize_chars(&chars)
}

pub fn tokenize_chars(chars: &[char]) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for &c in chars {
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if c.is_alphanumeric() || c == '_' {
            current.push(c);
        } else {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}
