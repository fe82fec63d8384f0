//! Unified diffs between rendered programs.

use similar::TextDiff;

/// Unified diff of `old` to `new` with three lines of context; empty when
/// the texts are equal.
pub fn unified_diff(old: &str, new: &str, name: &str) -> String {
    if old == new {
        return String::new();
    }
    TextDiff::from_lines(old, new)
        .unified_diff()
        .context_radius(3)
        .header(&format!("a/{name}"), &format!("b/{name}"))
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_marks_changed_lines() {
        let d = unified_diff("a\nb\n", "a\nc\n", "x.mjcc");
        assert!(d.starts_with("--- a/x.mjcc\n+++ b/x.mjcc\n"));
        assert!(d.contains("-b\n") && d.contains("+c\n"));
        assert!(unified_diff("a\n", "a\n", "x").is_empty());
    }
}
