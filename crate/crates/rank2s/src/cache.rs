//! Versioned cache files for null distributions and mixture quantiles.
//!
//! Null distributions are stored as integer numerator/count pairs over the
//! statistic's grid denominator, so a round trip through the cache is
//! bit-exact. Mixture quantiles are stored one per line keyed by
//! (d, alpha, sample_count, seed).

use crate::error::{Error, Result};
use crate::nulldist::{NullDistribution, NullKind};
use crate::stats::StatisticKind;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

pub const NULL_CACHE_MAGIC: &str = "rank2s-null";
pub const NULL_CACHE_VERSION: u32 = 1;
pub const QUANTILE_CACHE_MAGIC: &str = "rank2s-zd-quantiles";
pub const QUANTILE_CACHE_VERSION: u32 = 1;

/// Canonical cache file name for a null distribution, keyed by
/// (statistic, m, n, kind, reps, seed).
pub fn null_cache_filename(
    statistic: StatisticKind,
    m: usize,
    n: usize,
    kind: NullKind,
    seed: Option<u64>,
    reps: Option<u64>,
) -> String {
    match kind {
        NullKind::Exact => format!("null_{statistic}_m{m}_n{n}_exact.csv"),
        NullKind::MonteCarlo => format!(
            "null_{statistic}_m{m}_n{n}_mc_r{}_s{}.csv",
            reps.unwrap_or(0),
            seed.unwrap_or(0)
        ),
    }
}

pub fn write_null(null: &NullDistribution, w: &mut impl Write) -> Result<()> {
    writeln!(w, "{NULL_CACHE_MAGIC},{NULL_CACHE_VERSION}")?;
    writeln!(w, "statistic,{}", null.statistic())?;
    let kind = match null.kind() {
        NullKind::Exact => "exact",
        NullKind::MonteCarlo => "mc",
    };
    writeln!(w, "kind,{kind}")?;
    writeln!(w, "m,{}", null.m())?;
    writeln!(w, "n,{}", null.n())?;
    writeln!(w, "denom,{}", null.denominator())?;
    writeln!(w, "total,{}", null.total())?;
    match null.seed() {
        Some(seed) => writeln!(w, "seed,{seed}")?,
        None => writeln!(w, "seed,-")?,
    }
    writeln!(w, "numerator,count")?;
    for (num, count) in null.numerators().iter().zip(null.counts()) {
        writeln!(w, "{num},{count}")?;
    }
    Ok(())
}

pub fn read_null(r: impl BufRead) -> Result<NullDistribution> {
    let mut lines = r.lines();
    let mut field = |name: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedCache(format!("missing {name} line")))??;
        let (key, value) = line
            .split_once(',')
            .ok_or_else(|| Error::MalformedCache(format!("bad {name} line: {line}")))?;
        if key != name {
            return Err(Error::MalformedCache(format!(
                "expected `{name}`, found `{key}`"
            )));
        }
        Ok(value.to_string())
    };

    let version = field(NULL_CACHE_MAGIC)?;
    if version.parse::<u32>().ok() != Some(NULL_CACHE_VERSION) {
        return Err(Error::MalformedCache(format!(
            "unsupported version {version}"
        )));
    }
    let statistic = StatisticKind::parse(&field("statistic")?)?;
    let kind = match field("kind")?.as_str() {
        "exact" => NullKind::Exact,
        "mc" => NullKind::MonteCarlo,
        other => return Err(Error::MalformedCache(format!("unknown kind `{other}`"))),
    };
    let parse_num = |what: &str, s: String| -> Result<u64> {
        s.parse()
            .map_err(|_| Error::MalformedCache(format!("bad {what}: {s}")))
    };
    let m = parse_num("m", field("m")?)? as usize;
    let n = parse_num("n", field("n")?)? as usize;
    let denom = parse_num("denom", field("denom")?)?;
    let total = parse_num("total", field("total")?)?;
    let seed_field = field("seed")?;
    let seed = if seed_field == "-" {
        None
    } else {
        Some(parse_num("seed", seed_field)?)
    };
    let header = field("numerator")?;
    if header != "count" {
        return Err(Error::MalformedCache(
            "missing numerator,count header".into(),
        ));
    }

    let mut support: BTreeMap<i64, u64> = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (num, count) = line
            .split_once(',')
            .ok_or_else(|| Error::MalformedCache(format!("bad support row: {line}")))?;
        let num: i64 = num
            .parse()
            .map_err(|_| Error::MalformedCache(format!("bad numerator: {num}")))?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::MalformedCache(format!("bad count: {count}")))?;
        if support.insert(num, count).is_some() {
            return Err(Error::MalformedCache(format!("duplicate numerator {num}")));
        }
    }
    let null = NullDistribution::from_support(kind, statistic, m, n, support, denom, seed);
    if null.total() != total {
        return Err(Error::MalformedCache(format!(
            "count sum {} does not match declared total {total}",
            null.total()
        )));
    }
    Ok(null)
}

/// One persisted mixture quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileEntry {
    pub d: usize,
    pub alpha: f64,
    pub sample_count: u64,
    pub seed: u64,
    pub quantile: f64,
}

/// Flat table of Z_d quantiles, persisted as a small CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantileTable {
    entries: Vec<QuantileEntry>,
}

impl QuantileTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[QuantileEntry] {
        &self.entries
    }

    pub fn lookup(&self, d: usize, alpha: f64, sample_count: u64, seed: u64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| {
                e.d == d && e.alpha == alpha && e.sample_count == sample_count && e.seed == seed
            })
            .map(|e| e.quantile)
    }

    /// Inserts or replaces the entry with the same key.
    pub fn insert(&mut self, entry: QuantileEntry) {
        self.entries.retain(|e| {
            !(e.d == entry.d
                && e.alpha == entry.alpha
                && e.sample_count == entry.sample_count
                && e.seed == entry.seed)
        });
        self.entries.push(entry);
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{QUANTILE_CACHE_MAGIC},{QUANTILE_CACHE_VERSION}")?;
        writeln!(w, "d,alpha,sample_count,seed,quantile")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{}",
                e.d, e.alpha, e.sample_count, e.seed, e.quantile
            )?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let magic = lines
            .next()
            .ok_or_else(|| Error::MalformedCache("empty quantile table".into()))??;
        if magic != format!("{QUANTILE_CACHE_MAGIC},{QUANTILE_CACHE_VERSION}") {
            return Err(Error::MalformedCache(format!("bad header: {magic}")));
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedCache("missing column header".into()))??;
        if header != "d,alpha,sample_count,seed,quantile" {
            return Err(Error::MalformedCache(format!("bad columns: {header}")));
        }
        let mut table = QuantileTable::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(Error::MalformedCache(format!("bad row: {line}")));
            }
            let parse_err = |what: &str| Error::MalformedCache(format!("bad {what}: {line}"));
            table.entries.push(QuantileEntry {
                d: parts[0].parse().map_err(|_| parse_err("d"))?,
                alpha: parts[1].parse().map_err(|_| parse_err("alpha"))?,
                sample_count: parts[2].parse().map_err(|_| parse_err("sample_count"))?,
                seed: parts[3].parse().map_err(|_| parse_err("seed"))?,
                quantile: parts[4].parse().map_err(|_| parse_err("quantile"))?,
            });
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulldist::{exact_null, mc_null};
    use std::io::BufReader;

    #[test]
    fn null_roundtrip_exact() {
        let null = exact_null(4, 5, StatisticKind::T).unwrap();
        let mut buf = Vec::new();
        write_null(&null, &mut buf).unwrap();
        let back = read_null(BufReader::new(&buf[..])).unwrap();
        assert_eq!(null, back);
    }

    #[test]
    fn null_roundtrip_mc_bit_exact() {
        let null = mc_null(6, 4, StatisticKind::CvM, 5000, 77).unwrap();
        let mut buf = Vec::new();
        write_null(&null, &mut buf).unwrap();
        let back = read_null(BufReader::new(&buf[..])).unwrap();
        assert_eq!(null, back);
        assert_eq!(back.seed(), Some(77));
    }

    #[test]
    fn null_rejects_corruption() {
        let null = exact_null(3, 3, StatisticKind::T).unwrap();
        let mut buf = Vec::new();
        write_null(&null, &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("total,20", "total,21");
        assert!(read_null(BufReader::new(text.as_bytes())).is_err());
    }

    #[test]
    fn filenames() {
        assert_eq!(
            null_cache_filename(StatisticKind::T, 7, 7, NullKind::Exact, None, None),
            "null_T_m7_n7_exact.csv"
        );
        assert_eq!(
            null_cache_filename(
                StatisticKind::CvM,
                50,
                40,
                NullKind::MonteCarlo,
                Some(42),
                Some(100_000)
            ),
            "null_CvM_m50_n40_mc_r100000_s42.csv"
        );
    }

    #[test]
    fn quantile_table_roundtrip() {
        let mut table = QuantileTable::new();
        table.insert(QuantileEntry {
            d: 4,
            alpha: 0.05,
            sample_count: 10_000_000,
            seed: 1,
            quantile: 1.977_181_234_567_89,
        });
        table.insert(QuantileEntry {
            d: 1,
            alpha: 0.05,
            sample_count: 10_000_000,
            seed: 1,
            quantile: 1.929_876_543_21,
        });
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = QuantileTable::read(BufReader::new(&buf[..])).unwrap();
        assert_eq!(table, back);
        assert_eq!(
            back.lookup(4, 0.05, 10_000_000, 1),
            Some(1.977_181_234_567_89)
        );
        assert_eq!(back.lookup(4, 0.01, 10_000_000, 1), None);
    }

    #[test]
    fn quantile_insert_replaces() {
        let mut table = QuantileTable::new();
        let mut e = QuantileEntry {
            d: 2,
            alpha: 0.05,
            sample_count: 100_000,
            seed: 3,
            quantile: 1.0,
        };
        table.insert(e.clone());
        e.quantile = 2.0;
        table.insert(e);
        assert_eq!(table.entries().len(), 1);
        assert_eq!(table.lookup(2, 0.05, 100_000, 3), Some(2.0));
    }
}
