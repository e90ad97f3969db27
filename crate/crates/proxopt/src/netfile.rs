//! Plain-text network serialization.
//!
//! The format is line-oriented. Blank lines and `#` comments are ignored;
//! every other line is either
//!
//! ```text
//! i x y    position of node i (meters)
//! i j      undirected edge between nodes i and j
//! ```
//!
//! distinguished by token count. Every node referenced by an edge must have
//! a position line; node indices must be contiguous from 0. Parsing returns
//! a [`RawGraph`](crate::graph::RawGraph), so structural validation
//! (connectivity, duplicates) stays a separate, explicit step.

use std::fmt::Write as _;

use crate::graph::{Network, RawGraph};
use crate::{Error, Result};

/// Upper bound on node indices accepted by the parser, guarding against
/// allocation blow-ups from corrupt input.
pub const MAX_NODE_INDEX: usize = 1 << 20;

/// Parses the plain-text network format into an unvalidated graph.
///
/// # Errors
///
/// `Parse` with a 1-based line number for malformed tokens, indices out of
/// range, missing or duplicate position lines.
///
/// # Example
///
/// ```
/// use proxopt::netfile::parse_network;
///
/// let text = "0 0.0 0.0\n1 100.0 0.0\n0 1\n";
/// let raw = parse_network(text).unwrap();
/// assert_eq!(raw.n_nodes(), 2);
/// assert_eq!(raw.edges, vec![(0, 1)]);
/// ```
pub fn parse_network(text: &str) -> Result<RawGraph> {
    let mut positions: Vec<Option<[f64; 2]>> = Vec::new();
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.len() {
            0 => continue,
            2 => {
                let i = parse_index(tokens[0], lineno)?;
                let j = parse_index(tokens[1], lineno)?;
                edges.push((i, j, lineno));
            }
            3 => {
                let i = parse_index(tokens[0], lineno)?;
                let x = parse_coord(tokens[1], lineno)?;
                let y = parse_coord(tokens[2], lineno)?;
                if positions.len() <= i {
                    positions.resize(i + 1, None);
                }
                if positions[i].is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("duplicate position for node {i}"),
                    });
                }
                positions[i] = Some([x, y]);
            }
            n => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 2 tokens (edge) or 3 (position), found {n}"),
                });
            }
        }
    }

    let n = positions.len();
    let positions: Vec<[f64; 2]> = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("no position line for node {i}"),
            })
        })
        .collect::<Result<_>>()?;
    let edges = edges
        .into_iter()
        .map(|(i, j, lineno)| {
            if i >= n || j >= n {
                Err(Error::Parse {
                    line: lineno,
                    message: format!("edge ({i}, {j}) references a node without a position"),
                })
            } else {
                Ok((i, j))
            }
        })
        .collect::<Result<_>>()?;
    Ok(RawGraph { positions, edges })
}

/// Parses and validates in one step, yielding a usable [`Network`].
pub fn parse_and_validate(text: &str) -> Result<Network> {
    parse_network(text)?.validate()
}

/// Renders a network in the format accepted by [`parse_network`]:
/// positions block first, then canonical edges. Round-trips exactly
/// (coordinates are written with full precision).
#[must_use]
pub fn to_text(net: &Network) -> String {
    let mut out = String::new();
    for (i, p) in net.positions().iter().enumerate() {
        let _ = writeln!(out, "{} {:.17e} {:.17e}", i, p[0], p[1]);
    }
    for &(i, j) in net.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

fn parse_index(token: &str, line: usize) -> Result<usize> {
    let i: usize = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid node index {token:?}"),
    })?;
    if i > MAX_NODE_INDEX {
        return Err(Error::Parse {
            line,
            message: format!("node index {i} exceeds the limit {MAX_NODE_INDEX}"),
        });
    }
    Ok(i)
}

fn parse_coord(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid coordinate {token:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("coordinate {token:?} is not finite"),
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_grid, Region};

    #[test]
    fn round_trip_preserves_grid() {
        let net = make_grid(3, 5, Region::new(200.0, 100.0).unwrap()).unwrap();
        let text = to_text(&net);
        let back = parse_and_validate(&text).unwrap();
        assert_eq!(back.positions(), net.positions());
        assert_eq!(back.edges(), net.edges());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# two nodes\n\n0 0 0  # origin\n1 1 0\n0 1\n";
        let raw = parse_network(text).unwrap();
        assert_eq!(raw.n_nodes(), 2);
        assert_eq!(raw.edges, vec![(0, 1)]);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "0 0 0\n1 1 0\n0 1 extra tokens here\n";
        match parse_network(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_edge_to_positionless_node() {
        let text = "0 0 0\n0 7\n";
        assert!(parse_network(text).is_err());
    }

    #[test]
    fn rejects_missing_position_gap() {
        // Node 1 has no position but node 2 does.
        let text = "0 0 0\n2 2 0\n0 2\n";
        assert!(parse_network(text).is_err());
    }

    #[test]
    fn rejects_duplicate_position() {
        let text = "0 0 0\n0 1 1\n";
        assert!(parse_network(text).is_err());
    }

    #[test]
    fn rejects_huge_indices() {
        let text = format!("{} 0 0\n", MAX_NODE_INDEX + 1);
        assert!(parse_network(&text).is_err());
    }

    #[test]
    fn rejects_non_finite_coordinates() {
        assert!(parse_network("0 inf 0\n").is_err());
        assert!(parse_network("0 0 NaN\n").is_err());
    }

    #[test]
    fn parse_does_not_validate_structure() {
        // Disconnected input parses fine; validation is the caller's call.
        let text = "0 0 0\n1 1 0\n2 2 0\n3 3 0\n0 1\n2 3\n";
        let raw = parse_network(text).unwrap();
        assert!(!raw.is_connected());
        assert!(raw.validate().is_err());
    }
}
