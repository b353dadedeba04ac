use std::io::BufRead;

use super::{CorpusError, Link, SentencePair};
use crate::lang::Lang;

/// Parses `0-1 1-0 ...`. An empty string is an empty alignment.
pub fn parse_pharaoh(s: &str) -> Result<Vec<Link>, String> {
    s.split_whitespace()
        .map(|tok| {
            let (i, j) = tok
                .split_once('-')
                .ok_or_else(|| format!("bad link {tok:?}"))?;
            let i = i.parse().map_err(|_| format!("bad link {tok:?}"))?;
            let j = j.parse().map_err(|_| format!("bad link {tok:?}"))?;
            Ok((i, j))
        })
        .collect()
}

pub fn write_pharaoh(links: &[Link]) -> String {
    links
        .iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads a corpus file: one pair per line,
/// `id \t source_text \t target_text [\t alignment [\t tag]]`.
///
/// A missing or empty fourth column means "no stored alignment". Blank lines
/// and lines starting with `#` are skipped. Ids must be unique.
pub fn read_corpus(
    reader: impl BufRead,
    source_lang: &Lang,
    target_lang: &Lang,
) -> Result<Vec<SentencePair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(3..=5).contains(&cols.len()) {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("expected 3 to 5 tab-separated columns, got {}", cols.len()),
            });
        }
        let id = cols[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!("duplicate sentence id {id:?}"),
            });
        }
        let mut pair = SentencePair::new(
            id,
            source_lang.clone(),
            target_lang.clone(),
            cols[1],
            cols[2],
        )?;
        if let Some(a) = cols.get(3).filter(|a| !a.trim().is_empty()) {
            let links = parse_pharaoh(a).map_err(|message| CorpusError::Malformed {
                line: line_no,
                message,
            })?;
            pair.alignment = Some(links);
        }
        pair.tag = cols.get(4).filter(|t| !t.is_empty()).map(|t| t.to_string());
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_lines() {
        let text =
            "# comment\n1\tBeautiful day\t美しい 日\t0-0 1-1\n2\tgood\tよい\n3\ta\tb\t\tADJ\n";
        let en = Lang::new("en").unwrap();
        let ja = Lang::new("ja").unwrap();
        let pairs = read_corpus(text.as_bytes(), &en, &ja).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].alignment, Some(vec![(0, 0), (1, 1)]));
        assert_eq!(pairs[1].alignment, None);
        assert_eq!(pairs[2].alignment, None);
        assert_eq!(pairs[2].tag.as_deref(), Some("ADJ"));
    }

    #[test]
    fn malformed_lines_report_number() {
        let en = Lang::new("en").unwrap();
        let ja = Lang::new("ja").unwrap();
        let err = read_corpus("1\ta\tb\n2\tonly-two\n".as_bytes(), &en, &ja);
        assert!(matches!(err, Err(CorpusError::Malformed { line: 2, .. })));
        let err = read_corpus("1\ta\tb\t0-x\n".as_bytes(), &en, &ja);
        assert!(matches!(err, Err(CorpusError::Malformed { line: 1, .. })));
        let err = read_corpus("1\ta\tb\n1\tc\td\n".as_bytes(), &en, &ja);
        assert!(matches!(err, Err(CorpusError::Malformed { line: 2, .. })));
    }

    #[test]
    fn pharaoh_round_trip() {
        let links = vec![(0, 1), (2, 0), (10, 3)];
        assert_eq!(parse_pharaoh(&write_pharaoh(&links)).unwrap(), links);
        assert_eq!(parse_pharaoh("").unwrap(), vec![]);
    }
}
