/// The SQL to execute from a model generation: the last fenced code block if
/// there is one, otherwise the last non-empty `;`-separated statement.
pub fn extract_sql(text: &str) -> String {
    if let Some(block) = last_fenced_block(text) {
        return last_statement(block);
    }
    last_statement(text)
}

fn last_fenced_block(text: &str) -> Option<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find("```") {
        let after_open = &rest[open + 3..];
        let body_start = after_open.find('\n').map_or(after_open.len(), |i| i + 1);
        let body = &after_open[body_start..];
        let Some(close) = body.find("```") else { break };
        blocks.push(&text[offset + open + 3 + body_start..offset + open + 3 + body_start + close]);
        let consumed = open + 3 + body_start + close + 3;
        offset += consumed;
        rest = &rest[consumed..];
    }
    blocks.pop()
}

fn last_statement(text: &str) -> String {
    text.split(';')
        .map(str::trim)
        .rfind(|s| !s.is_empty())
        .unwrap_or("")
        .to_string()
}
