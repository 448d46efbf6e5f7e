//! Graph families that can be loaded at any radius: weighted Cayley graphs,
//! the Trofimov ladder, the asymmetric hitting graph, and fixed finite graphs.
//!
//! Infinite objects are only ever touched through finite balls. A ball of
//! radius `r` carries distance tags and records, per vertex, how much edge
//! weight was cut off, so downstream code can tell which rows of an operator
//! are fully known.

use crate::error::{Error, Result};
use crate::graphs::{self, WeightedGraph};
use crate::groups::{cayley_ball, GroupModel, SymmetricMeasure};

#[derive(Clone, Debug)]
pub enum GraphFamily {
    Cayley { group: GroupModel, mu: SymmetricMeasure },
    /// The 3-regular ladder, loaded with as many cells as a ball needs.
    Trofimov,
    /// The asymmetric hitting graph, loaded with as much tree as a ball needs.
    Asym,
    /// A finite graph; balls are taken about its base vertex.
    Fixed(WeightedGraph),
}

impl GraphFamily {
    pub fn cayley(group: GroupModel, mu: SymmetricMeasure) -> Self {
        GraphFamily::Cayley { group, mu }
    }

    /// Parses `gallery:trofimov`, `gallery:trofimov:<cells>`, `gallery:asym`,
    /// `gallery:asym:<depth>`, `gallery:c<k>`, `gallery:path:<a>:<b>`; any
    /// other string is read as a path to a graph JSON file.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown graph {spec:?}"));
        let Some(rest) = spec.strip_prefix("gallery:") else {
            let text = std::fs::read_to_string(spec).map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
            return Ok(GraphFamily::Fixed(WeightedGraph::load(&text)?));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |s: &str| s.parse::<i64>().map_err(|_| bad());
        match parts.as_slice() {
            ["trofimov"] => Ok(GraphFamily::Trofimov),
            ["trofimov", n] => Ok(GraphFamily::Fixed(graphs::trofimov_ladder(num(n)? as usize)?)),
            ["asym"] => Ok(GraphFamily::Asym),
            ["asym", d] => Ok(GraphFamily::Fixed(graphs::asym_hitting_graph(num(d)? as usize)?)),
            ["path", a, b] => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(bad());
                }
                Ok(GraphFamily::Fixed(graphs::path(a, b)))
            }
            [c] if c.starts_with('c') => Ok(GraphFamily::Fixed(graphs::cycle(num(&c[1..])? as usize)?)),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GraphFamily::Cayley { group, .. } => format!("cayley({})", group.name()),
            GraphFamily::Trofimov => "trofimov".into(),
            GraphFamily::Asym => "asym".into(),
            GraphFamily::Fixed(g) => format!("fixed({} vertices)", g.len()),
        }
    }

    /// True for families whose balls keep growing.
    pub fn is_infinite(&self) -> bool {
        match self {
            GraphFamily::Cayley { group, .. } => group.is_infinite(),
            GraphFamily::Fixed(_) => false,
            _ => true,
        }
    }

    /// The loaded ball of radius `r` about the base, with distance tags.
    pub fn ball(&self, r: usize) -> Result<WeightedGraph> {
        match self {
            GraphFamily::Cayley { group, mu } => Ok(cayley_ball(group, mu, r)?.graph),
            // the end of cell k sits at distance 3k + 2 from the base
            GraphFamily::Trofimov => graphs::trofimov_ladder(r / 3 + 2)?.ball(r),
            // tree level l sits at distance l + 1 from the base x
            GraphFamily::Asym => graphs::asym_hitting_graph(r.max(1))?.ball(r),
            GraphFamily::Fixed(g) => g.ball(r),
        }
    }
}

/// Vertices of a tagged ball with distance at most `r`, in index order.
pub fn within(ball: &WeightedGraph, r: usize) -> Vec<usize> {
    let d = ball.dist_tags().expect("balls carry distance tags");
    (0..ball.len()).filter(|&v| d[v] <= r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expandable_balls_are_complete_inside() {
        for fam in [GraphFamily::Trofimov, GraphFamily::Asym] {
            for r in 1..8 {
                let b = fam.ball(r).unwrap();
                for v in within(&b, r - 1) {
                    assert!(b.is_complete(v), "{} r={r} vertex {}", fam.name(), b.id(v));
                    assert_eq!(b.degree(v), crate::rational::qi(3));
                }
            }
        }
    }

    #[test]
    fn parse_gallery_ids() {
        assert!(matches!(GraphFamily::parse("gallery:trofimov").unwrap(), GraphFamily::Trofimov));
        let GraphFamily::Fixed(c) = GraphFamily::parse("gallery:c5").unwrap() else { panic!() };
        assert_eq!(c.len(), 5);
        let GraphFamily::Fixed(t) = GraphFamily::parse("gallery:trofimov:3").unwrap() else { panic!() };
        assert_eq!(t.len(), 13);
        assert!(GraphFamily::parse("gallery:nope").is_err());
    }
}
