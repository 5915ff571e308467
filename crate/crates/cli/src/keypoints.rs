//! Keypoint text files.
//!
//! One correspondence per line, one entry per surface (two for a surface
//! map, `k` for a collection). An entry is a vertex index (`12`), a 3D
//! point (`0.1 0.2 0.3`) or a domain location (`uv 0.5 0.5`). Blank lines
//! and `#` comments are skipped.

use std::path::Path;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeypointEntry {
    Vertex(usize),
    Point([f64; 3]),
    Uv([f64; 2]),
}

pub fn load(path: &Path, per_line: usize) -> Result<Vec<Vec<KeypointEntry>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, per_line).map_err(|(line, message)| CliError::Keypoints {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses the file body; errors carry the 1-based line number.
pub fn parse(text: &str, per_line: usize) -> Result<Vec<Vec<KeypointEntry>>, (usize, String)> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let mut found = Vec::new();
        split_entries(&tokens, per_line, &mut Vec::new(), &mut found);
        match found.len() {
            0 => return Err((n + 1, format!("cannot read {per_line} keypoint entries from {line:?}"))),
            1 => rows.push(found.pop().unwrap()),
            _ => {
                return Err((
                    n + 1,
                    format!("{line:?} splits into {per_line} entries in more than one way; mark domain points with `uv`"),
                ))
            }
        }
    }
    Ok(rows)
}

/// Collects every way of reading `tokens` as exactly `left` entries.
fn split_entries(tokens: &[&str], left: usize, prefix: &mut Vec<KeypointEntry>, out: &mut Vec<Vec<KeypointEntry>>) {
    if left == 0 {
        if tokens.is_empty() {
            out.push(prefix.clone());
        }
        return;
    }
    let mut attempt = |entry: Option<KeypointEntry>, used: usize, out: &mut Vec<Vec<KeypointEntry>>| {
        if let Some(e) = entry {
            prefix.push(e);
            split_entries(&tokens[used..], left - 1, prefix, out);
            prefix.pop();
        }
    };
    if tokens.first() == Some(&"uv") {
        let uv = floats::<2>(&tokens[1..]).map(KeypointEntry::Uv);
        attempt(uv, 3, out);
        return;
    }
    let vertex = tokens.first().and_then(|t| t.parse::<usize>().ok()).map(KeypointEntry::Vertex);
    attempt(vertex, 1, out);
    let point = floats::<3>(tokens).map(KeypointEntry::Point);
    attempt(point, 3, out);
}

fn floats<const N: usize>(tokens: &[&str]) -> Option<[f64; N]> {
    if tokens.len() < N {
        return None;
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(tokens) {
        if *t == "uv" {
            return None;
        }
        *o = t.parse().ok().filter(|x: &f64| x.is_finite())?;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_pairs_and_point_triples() {
        let rows = parse("# nose\n3 17\n0.1 0.2 0.3   1 2 3\n", 2).unwrap();
        assert_eq!(rows[0], vec![KeypointEntry::Vertex(3), KeypointEntry::Vertex(17)]);
        assert_eq!(
            rows[1],
            vec![KeypointEntry::Point([0.1, 0.2, 0.3]), KeypointEntry::Point([1.0, 2.0, 3.0])]
        );
    }

    #[test]
    fn uv_entries_mix_with_others() {
        let rows = parse("uv 0.5 0.25 4\n", 2).unwrap();
        assert_eq!(rows[0], vec![KeypointEntry::Uv([0.5, 0.25]), KeypointEntry::Vertex(4)]);
        let rows = parse("uv 0 0 uv 1 1 uv 0.5 0.5\n", 3).unwrap();
        assert_eq!(rows[0][2], KeypointEntry::Uv([0.5, 0.5]));
    }

    #[test]
    fn ambiguous_and_short_lines_are_rejected() {
        // vertex + point or point + vertex
        assert!(parse("1 2 3 4\n", 2).unwrap_err().1.contains("more than one way"));
        assert_eq!(parse("\n\n5\n", 2).unwrap_err().0, 3);
        assert!(parse("1 x\n", 2).is_err());
    }
}
