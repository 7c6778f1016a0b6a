//! JSON-lines post logs: one `{"user", "ts", "tokens", "tags"}` object per
//! line.

use anyhow::{bail, Result};
use concmtf_core::corpus::PostRecord;

/// Largest tolerated share of malformed lines.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformed {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub posts: Vec<PostRecord>,
    /// Skipped lines in file order.
    pub malformed: Vec<Malformed>,
    /// Non-blank lines read.
    pub lines: usize,
}

fn parse_line(line: &str) -> std::result::Result<PostRecord, String> {
    let post: PostRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if post.timestamp < 0 {
        return Err(format!("negative timestamp {}", post.timestamp));
    }
    Ok(post)
}

/// Parses every non-blank line, collecting the malformed ones. Fails when
/// more than 1% of the lines are malformed.
pub fn parse_posts(text: &str) -> Result<Ingested> {
    let mut posts = Vec::new();
    let mut malformed = Vec::new();
    let mut lines = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        match parse_line(line) {
            Ok(p) => posts.push(p),
            Err(message) => malformed.push(Malformed { line: n + 1, message }),
        }
    }
    if !malformed.is_empty() && malformed.len() as f64 > MAX_MALFORMED_FRACTION * lines as f64 {
        let listed: Vec<String> = malformed.iter().take(10).map(|m| format!("  line {}: {}", m.line, m.message)).collect();
        bail!(
            "{} of {lines} lines are malformed (limit {}%):\n{}",
            malformed.len(),
            MAX_MALFORMED_FRACTION * 100.0,
            listed.join("\n")
        );
    }
    Ok(Ingested { posts, malformed, lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records() {
        let text = "{\"user\":\"u1\",\"ts\":5,\"tokens\":[\"flux\"],\"tags\":[\"a\"]}\n\n{\"user\":\"u2\",\"ts\":7,\"tokens\":[]}\n";
        let ing = parse_posts(text).unwrap();
        assert_eq!(ing.lines, 2);
        assert_eq!(ing.posts[1].tags, Vec::<String>::new());
        assert_eq!(ing.posts[0].user_id, "u1");
    }

    #[test]
    fn reports_line_numbers() {
        let good = "{\"user\":\"u\",\"ts\":1,\"tokens\":[\"x\"],\"tags\":[]}\n";
        let mut text = good.repeat(150);
        text.push_str("{not json}\n");
        let ing = parse_posts(&text).unwrap();
        assert_eq!(ing.malformed.len(), 1);
        assert_eq!(ing.malformed[0].line, 151);

        let bad = format!("{good}{{\"user\":\"u\",\"ts\":-4,\"tokens\":[]}}\n");
        let err = parse_posts(&bad).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
