//! The weight-system file.
//!
//! ```text
//! # degree-3 example
//! rank 1; parities 1
//! 0
//! 1
//! 2
//! 3
//! chart
//! base_dim 1
//! trunc 3
//! dim 2 = 2
//! ```
//!
//! The header gives the rank and the parity of every basic weight, each
//! following line one weight as comma-separated coefficients. The optional
//! `chart` block sets the number of weight-zero coordinates, the truncation
//! degree and generator counts; unlisted weights get one generator.

use std::collections::BTreeMap;
use std::fmt;

use gradlin::{ChartLayout, Parity, Weight, WeightSystem};

/// A parse failure at a 1-based line and column.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChartBlock {
    pub base_dim: Option<usize>,
    pub trunc: Option<u32>,
    pub dims: Vec<(Vec<i64>, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemFile {
    pub parities: Vec<Parity>,
    pub rows: Vec<Vec<i64>>,
    pub chart: Option<ChartBlock>,
}

pub const DEFAULT_TRUNC: u32 = 3;

impl SystemFile {
    pub fn rank(&self) -> usize {
        self.parities.len()
    }

    pub fn system(&self) -> gradlin::Result<WeightSystem> {
        WeightSystem::from_rows(self.parities.clone(), &self.rows)
    }

    /// The flag wins over the file, the file over the default.
    pub fn trunc(&self, flag: Option<u32>) -> u32 {
        flag.or_else(|| self.chart.as_ref().and_then(|c| c.trunc))
            .unwrap_or(DEFAULT_TRUNC)
    }

    pub fn chart_layout(&self, flag: Option<u32>) -> gradlin::Result<ChartLayout> {
        let system = self.system()?;
        let block = self.chart.clone().unwrap_or_default();
        let listed: BTreeMap<Weight, usize> = block
            .dims
            .iter()
            .map(|(row, d)| (Weight::from_basic_coefficients(row), *d))
            .collect();
        let dims = system
            .elements()
            .iter()
            .filter(|w| !w.is_zero())
            .map(|w| (w.clone(), listed.get(w).copied().unwrap_or(1)))
            .chain(listed.clone())
            .collect();
        ChartLayout::new(system, block.base_dim.unwrap_or(1), dims, self.trunc(flag))
    }
}

fn row_text(row: &[i64]) -> String {
    row.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for SystemFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: Vec<String> = self.parities.iter().map(|p| p.bit().to_string()).collect();
        writeln!(f, "rank {}; parities {}", self.rank(), bits.join(" "))?;
        for row in &self.rows {
            writeln!(f, "{}", row_text(row))?;
        }
        if let Some(c) = &self.chart {
            writeln!(f, "chart")?;
            if let Some(b) = c.base_dim {
                writeln!(f, "base_dim {b}")?;
            }
            if let Some(t) = c.trunc {
                writeln!(f, "trunc {t}")?;
            }
            for (row, d) in &c.dims {
                writeln!(f, "dim {} = {d}", row_text(row))?;
            }
        }
        Ok(())
    }
}

/// A line with comments stripped, remembering where it came from.
struct Line<'a> {
    number: usize,
    text: &'a str,
    /// Byte offset of `text` in the raw line.
    offset: usize,
}

impl Line<'_> {
    fn error(&self, at: usize, message: impl Into<String>) -> ParseError {
        ParseError::new(self.number, self.offset + at + 1, message)
    }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(k, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let trimmed = body.trim_start();
            let offset = body.len() - trimmed.len();
            let trimmed = trimmed.trim_end();
            (!trimmed.is_empty()).then_some(Line {
                number: k + 1,
                text: trimmed,
                offset,
            })
        })
        .collect()
}

/// Split on `sep`, yielding each trimmed piece with its offset.
fn pieces(s: &str, sep: char) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for part in s.split(sep) {
        let lead = part.len() - part.trim_start().len();
        out.push((start + lead, part.trim()));
        start += part.len() + sep.len_utf8();
    }
    out
}

fn parse_int<T: std::str::FromStr>(line: &Line, at: usize, s: &str, what: &str) -> Result<T, ParseError> {
    s.parse()
        .map_err(|_| line.error(at, format!("expected {what}, found `{s}`")))
}

/// Comma-separated integer coefficients starting at byte `at` of the line.
fn parse_row(line: &Line, at: usize, s: &str, rank: usize) -> Result<Vec<i64>, ParseError> {
    let row = pieces(s, ',')
        .into_iter()
        .map(|(off, p)| parse_int(line, at + off, p, "an integer coefficient"))
        .collect::<Result<Vec<i64>, _>>()?;
    if row.len() != rank {
        return Err(line.error(at, format!("expected {rank} coefficients, found {}", row.len())));
    }
    Ok(row)
}

fn parse_header(line: &Line) -> Result<Vec<Parity>, ParseError> {
    let parts = pieces(line.text, ';');
    let [(r_at, rank_part), (p_at, parity_part)] = parts[..] else {
        return Err(line.error(0, "expected `rank r; parities p1 .. pr`"));
    };
    let rank_value = rank_part
        .strip_prefix("rank")
        .ok_or_else(|| line.error(r_at, "expected `rank`"))?;
    let lead = rank_value.len() - rank_value.trim_start().len();
    let rank: usize = parse_int(line, r_at + 4 + lead, rank_value.trim(), "the rank")?;
    let bits = parity_part
        .strip_prefix("parities")
        .ok_or_else(|| line.error(p_at, "expected `parities`"))?;
    let base = p_at + "parities".len();
    let mut parities = Vec::new();
    let mut pos = 0;
    for token in bits.split_whitespace() {
        let off = bits[pos..].find(token).map_or(pos, |k| pos + k);
        pos = off + token.len();
        for (k, ch) in token.char_indices() {
            match ch {
                '0' => parities.push(Parity::Even),
                '1' => parities.push(Parity::Odd),
                _ => return Err(line.error(base + off + k, format!("parity must be 0 or 1, found `{ch}`"))),
            }
        }
    }
    if parities.len() != rank {
        return Err(line.error(base, format!("expected {rank} parities, found {}", parities.len())));
    }
    Ok(parities)
}

pub fn parse(text: &str) -> Result<SystemFile, ParseError> {
    let lines = lines(text);
    let Some(header) = lines.first() else {
        return Err(ParseError::new(1, 1, "empty system file"));
    };
    let parities = parse_header(header)?;
    let rank = parities.len();
    let mut rows = Vec::new();
    let mut chart: Option<ChartBlock> = None;
    for line in &lines[1..] {
        let Some(block) = chart.as_mut() else {
            if line.text == "chart" {
                chart = Some(ChartBlock::default());
            } else {
                rows.push(parse_row(line, 0, line.text, rank)?);
            }
            continue;
        };
        let (key, rest) = line.text.split_once(char::is_whitespace).unwrap_or((line.text, ""));
        let lead = rest.len() - rest.trim_start().len();
        let at = key.len() + 1 + lead;
        let rest = rest.trim();
        match key {
            "base_dim" => block.base_dim = Some(parse_int(line, at, rest, "a dimension")?),
            "trunc" => block.trunc = Some(parse_int(line, at, rest, "a truncation degree")?),
            "dim" => {
                let Some((row, d)) = rest.split_once('=') else {
                    return Err(line.error(at, "expected `dim <coefficients> = <count>`"));
                };
                let row = parse_row(line, at, row.trim_end(), rank)?;
                let d_at = at + rest.find('=').unwrap_or(0) + 1;
                let lead = d.len() - d.trim_start().len();
                let count = parse_int(line, d_at + lead, d.trim(), "a dimension")?;
                if row.iter().all(|&c| c == 0) {
                    block.base_dim = Some(count);
                } else {
                    block.dims.push((row, count));
                }
            }
            _ => return Err(line.error(0, format!("unknown chart key `{key}`"))),
        }
    }
    if let Some(block) = &chart {
        let present: Vec<&Vec<i64>> = rows.iter().collect();
        if let Some((row, _)) = block.dims.iter().find(|(r, _)| !present.contains(&r)) {
            let line = lines.iter().rev().find(|l| l.text.starts_with("dim")).unwrap_or(header);
            return Err(line.error(
                0,
                format!("dim given for {}, which is not a listed weight", row_text(row)),
            ));
        }
    }
    Ok(SystemFile { parities, rows, chart })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M3: &str = "# degree three\nrank 1; parities 1\n0\n1\n2\n3\nchart\nbase_dim 2\ntrunc 2\ndim 2 = 3\n";

    #[test]
    fn parses_header_rows_and_chart() {
        let s = parse(M3).unwrap();
        assert_eq!(s.parities, vec![Parity::Odd]);
        assert_eq!(s.rows, vec![vec![0], vec![1], vec![2], vec![3]]);
        let layout = s.chart_layout(None).unwrap();
        assert_eq!(layout.base_dim, 2);
        assert_eq!(layout.trunc, 2);
        assert_eq!(layout.dim(&Weight::basic(1).scale(2)), 3);
        assert_eq!(layout.dim(&Weight::basic(1)), 1);
        assert_eq!(s.chart_layout(Some(3)).unwrap().trunc, 3);
    }

    #[test]
    fn serialization_round_trips() {
        let s = parse(M3).unwrap();
        let text = s.to_string();
        assert_eq!(parse(&text).unwrap(), s);
        assert_eq!(parse(&text).unwrap().to_string(), text);
        let spaced = "  rank 2 ;  parities  0   1 \n 0 , 0\n1,0\n\n0,1 # basic\n";
        let t = parse(spaced).unwrap().to_string();
        assert_eq!(t, "rank 2; parities 0 1\n0,0\n1,0\n0,1\n");
    }

    #[test]
    fn errors_carry_locations() {
        let e = parse("rank 2; parities 0 1\n0,0\n1,x\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let e = parse("rank 2; parities 0 2\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 20));
        let e = parse("rank 1; parities 0\n0\n1,2\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse("rank 1; parities 0\n0\nchart\nfoo 3\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 1));
        let e = parse("rank 1; parities 0\n0\nchart\ndim 1 = z\n").unwrap_err();
        assert_eq!((e.line, e.column), (4, 9));
        assert!(parse("# nothing\n").is_err());
    }

    fn system_files() -> impl Strategy<Value = SystemFile> {
        (1usize..4).prop_flat_map(|rank| {
            (
                proptest::collection::vec(0u8..2, rank),
                proptest::collection::vec(proptest::collection::vec(-3i64..4, rank), 0..6),
                proptest::option::of((
                    proptest::option::of(0usize..4),
                    proptest::option::of(0u32..6),
                    0usize..4,
                )),
            )
                .prop_map(|(bits, rows, chart)| {
                    let chart = chart.map(|(base_dim, trunc, d)| ChartBlock {
                        base_dim,
                        trunc,
                        dims: rows
                            .iter()
                            .filter(|r| r.iter().any(|&c| c != 0))
                            .take(1)
                            .map(|r| (r.clone(), d))
                            .collect(),
                    });
                    SystemFile {
                        parities: bits.into_iter().map(Parity::from_bit).collect(),
                        rows,
                        chart,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(file in system_files()) {
            let text = file.to_string();
            prop_assert_eq!(parse(&text).unwrap(), file);
        }
    }
}
