/// A content line with its 1-based line number and the column where the
/// trimmed content starts in the original text.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub column: usize,
    pub text: &'a str,
}

impl Line<'_> {
    /// Whitespace-separated tokens with their 1-based columns.
    pub fn tokens(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, ch) in self.text.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    out.push((self.column + s, &self.text[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((self.column + s, &self.text[s..]));
        }
        out
    }
}

/// Splits model output into content lines: CR/LF normalized, `### ` markup
/// prefixes and surrounding whitespace stripped, leading and trailing blank
/// lines dropped. Interior blank lines are kept so the grammar can reject them.
pub(crate) fn content_lines(text: &str) -> Vec<Line<'_>> {
    let mut lines: Vec<Line<'_>> = text
        .split('\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            let mut offset = raw.len() - raw.trim_start().len();
            let mut body = raw.trim_start();
            if let Some(rest) = body.strip_prefix("###") {
                let trimmed = rest.trim_start();
                offset += 3 + (rest.len() - trimmed.len());
                body = trimmed;
            }
            Line {
                number: i + 1,
                column: offset + 1,
                text: body.trim_end(),
            }
        })
        .collect();
    while lines.last().is_some_and(|l| l.text.is_empty()) {
        lines.pop();
    }
    let lead = lines.iter().take_while(|l| l.text.is_empty()).count();
    lines.drain(..lead);
    lines
}

/// The salvage normalization applied before parsing model output, as text.
pub fn normalize_model_text(text: &str) -> String {
    content_lines(text)
        .iter()
        .map(|l| l.text)
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_markup_and_blank_edges() {
        let raw = "\r\n### P1\r\n  3.0 3.0 3.0  \n###   90 90 90\n\n";
        assert_eq!(normalize_model_text(raw), "P1\n3.0 3.0 3.0\n90 90 90");
        let lines = content_lines(raw);
        assert_eq!(lines[0].number, 2);
        assert_eq!(lines[0].column, 5);
        assert_eq!(lines[2].tokens(), vec![(7, "90"), (10, "90"), (13, "90")]);
    }
}
