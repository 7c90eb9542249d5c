//! Line format for a pair of relevance distributions:
//!
//! ```text
//! # comment
//! m=3
//! 110 0.1 0.3
//! ```
//!
//! One `bits p q` row per binary relevance vector, in any order.

use std::fmt::Write as _;

use rtopkf_core::impossibility::RelevanceDistribution;

use crate::error::{Error, Result};

/// The bundled counterexample pair.
pub const COUNTEREXAMPLE: &str = include_str!("../fixtures/counterexample.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPair {
    pub p: RelevanceDistribution,
    pub q: RelevanceDistribution,
}

pub fn parse_pair(text: &str) -> Result<DistributionPair> {
    let mut m: Option<usize> = None;
    let mut support = Vec::new();
    let mut p = Vec::new();
    let mut q = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some(m) = m else {
            let value = content
                .strip_prefix("m=")
                .ok_or_else(|| Error::parse(line_no, format!("expected header m=<int>, found {content:?}")))?;
            m = Some(
                value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad document count {value:?}")))?,
            );
            continue;
        };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [bits, pv, qv] = fields[..] else {
            return Err(Error::parse(line_no, format!("expected `bits p q`, found {content:?}")));
        };
        if bits.len() != m || !bits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::parse(line_no, format!("{bits:?} is not {m} relevance bits")));
        }
        let prob = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("bad probability {s:?}")))
        };
        support.push(bits.bytes().map(|b| b - b'0').collect::<Vec<u8>>());
        p.push(prob(pv)?);
        q.push(prob(qv)?);
    }
    let m = m.ok_or_else(|| Error::parse(1, "missing header m=<int>"))?;
    Ok(DistributionPair {
        p: RelevanceDistribution::new(m, support.clone(), p)?,
        q: RelevanceDistribution::new(m, support, q)?,
    })
}

pub fn format_pair(pair: &DistributionPair) -> String {
    let mut out = format!("m={}\n", pair.p.num_docs());
    let q_of = |bits: &[u8]| {
        pair.q
            .support()
            .iter()
            .position(|v| v == bits)
            .map(|i| pair.q.probs()[i])
            .expect("both distributions cover all binary vectors")
    };
    for (bits, pr) in pair.p.support().iter().zip(pair.p.probs()) {
        let b: String = bits.iter().map(|x| char::from(b'0' + x)).collect();
        writeln!(out, "{b} {pr:?} {:?}", q_of(bits)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_matches_the_built_in_pair() {
        let pair = parse_pair(COUNTEREXAMPLE).unwrap();
        assert_eq!(pair.p, RelevanceDistribution::counterexample_p());
        assert_eq!(pair.q, RelevanceDistribution::counterexample_q());
    }

    #[test]
    fn roundtrip() {
        let pair = parse_pair(COUNTEREXAMPLE).unwrap();
        assert_eq!(parse_pair(&format_pair(&pair)).unwrap(), pair);
    }

    #[test]
    fn malformed_files() {
        for (text, line) in [
            ("110 0.1 0.3", 1),
            ("m=3\n11 0.1 0.3", 2),
            ("m=3\n110 0.1", 2),
            ("m=x", 1),
            ("m=2\n00 0 0\n01 a 0", 3),
        ] {
            match parse_pair(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        // well formed but not a distribution
        assert!(matches!(parse_pair("m=1\n0 0.5 0.5\n1 0.4 0.5"), Err(Error::Core(_))));
    }
}
