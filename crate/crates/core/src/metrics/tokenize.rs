use super::MetricConfig;

/// Lowercases (when configured), splits every non-alphanumeric,
/// non-whitespace character into its own token, then splits on whitespace.
pub fn tokenize(text: &str, cfg: &MetricConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c.is_alphanumeric() {
            if cfg.lowercase {
                word.extend(c.to_lowercase());
            } else {
                word.push(c);
            }
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

fn flush(word: &mut String, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}
