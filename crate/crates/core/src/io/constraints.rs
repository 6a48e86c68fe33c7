//! Text format for distance constraints: one per line as
//! `i j target relation`, with relation `eq`, `le` (distance at most the
//! target), or `ge` (distance at least the target).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::apps::constraints::{ConstraintRecord, ConstraintSet};
use crate::error::{Error, Result};
use crate::regression::Relation;

fn relation_token(relation: Relation) -> &'static str {
    match relation {
        Relation::Equality => "eq",
        Relation::UpperBound => "le",
        Relation::LowerBound => "ge",
    }
}

fn parse_relation(token: &str) -> Option<Relation> {
    match token {
        "eq" => Some(Relation::Equality),
        "le" => Some(Relation::UpperBound),
        "ge" => Some(Relation::LowerBound),
        _ => None,
    }
}

/// Parses a constraint file; indices are validated pairwise-distinct and
/// targets nonnegative by `ConstraintSet::new`.
pub fn load_constraints(path: impl AsRef<Path>) -> Result<ConstraintSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::data(format!(
                "{}:{}: expected 'i j target relation', got {} fields",
                path.display(),
                lineno,
                fields.len()
            )));
        }
        let i: usize = fields[0].parse().map_err(|_| {
            Error::data(format!(
                "{}:{}: bad sample index '{}'",
                path.display(),
                lineno,
                fields[0]
            ))
        })?;
        let j: usize = fields[1].parse().map_err(|_| {
            Error::data(format!(
                "{}:{}: bad sample index '{}'",
                path.display(),
                lineno,
                fields[1]
            ))
        })?;
        let target: f64 = fields[2].parse().map_err(|_| {
            Error::data(format!(
                "{}:{}: bad target '{}'",
                path.display(),
                lineno,
                fields[2]
            ))
        })?;
        let relation = parse_relation(fields[3]).ok_or_else(|| {
            Error::data(format!(
                "{}:{}: unknown relation '{}', expected eq, le, or ge",
                path.display(),
                lineno,
                fields[3]
            ))
        })?;
        records.push(ConstraintRecord {
            i,
            j,
            target,
            relation,
        });
    }
    ConstraintSet::new(records)
}

pub fn save_constraints(path: impl AsRef<Path>, set: &ConstraintSet) -> Result<()> {
    let mut out = String::new();
    for rec in &set.records {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            rec.i,
            rec.j,
            rec.target,
            relation_token(rec.relation)
        );
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_all_three_relations() {
        let f = write_temp("0 1 2.5 le\n2 0 1.25 ge\n1 2 0.5 eq\n");
        let set = load_constraints(f.path()).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.records[0].relation, Relation::UpperBound);
        assert_eq!(set.records[1].relation, Relation::LowerBound);
        assert_eq!(set.records[2].relation, Relation::Equality);
        assert_eq!(set.records[1].target, 1.25);
        assert!(set.balance.is_none());
    }

    #[test]
    fn round_trips_through_a_file() {
        let set = ConstraintSet::new(vec![
            ConstraintRecord {
                i: 3,
                j: 7,
                target: 0.125,
                relation: Relation::UpperBound,
            },
            ConstraintRecord {
                i: 1,
                j: 0,
                target: 9.75,
                relation: Relation::LowerBound,
            },
        ])
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_constraints(f.path(), &set).unwrap();
        let back = load_constraints(f.path()).unwrap();
        assert_eq!(back.records, set.records);
    }

    #[test]
    fn reports_malformed_lines() {
        for (content, needle) in [
            ("0 1 2.0\n", ":1:"),
            ("0 1 2.0 lt\n", "unknown relation"),
            ("0 x 2.0 le\n", "bad sample index"),
            ("0 1 nope le\n", "bad target"),
            ("0 0 2.0 le\n", "itself"),
            ("0 1 -2.0 le\n", "nonnegative"),
        ] {
            let f = write_temp(content);
            let err = load_constraints(f.path()).unwrap_err().to_string();
            assert!(err.contains(needle), "{content:?} -> {err}");
        }
    }
}
