//! Plain-text formats: matrices, systems and integer sets.
//!
//! ```text
//! # comment
//! 1 3
//! 1 -2 1
//! ```
//! A system file has header `d t` followed by t rows of d coefficients and
//! an optional `constants: b1 ... bt` line.

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Ambient, IntMatrix, LinearSystem};
use crate::error::{Error, Result};

fn lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn ints(line: usize, s: &str) -> Result<Vec<BigInt>> {
    s.split_whitespace()
        .map(|w| {
            w.parse::<BigInt>().map_err(|_| Error::Parse {
                line,
                msg: format!("not an integer: {w:?}"),
            })
        })
        .collect()
}

fn header(it: &mut dyn Iterator<Item = (usize, &str)>) -> Result<(usize, usize)> {
    let (ln, h) = it.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let dims: Vec<usize> = h
        .split_whitespace()
        .map(|w| {
            w.parse().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("bad dimension {w:?}"),
            })
        })
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: ln,
            msg: "header must be two integers".into(),
        });
    }
    Ok((dims[0], dims[1]))
}

/// Parse `r t` followed by r rows of t integers.
pub fn parse_matrix(src: &str) -> Result<IntMatrix> {
    let mut it = lines(src);
    let (r, t) = header(&mut it)?;
    let mut rows = Vec::with_capacity(r);
    for _ in 0..r {
        let (ln, l) = it.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("expected {r} rows"),
        })?;
        let row = ints(ln, l)?;
        if row.len() != t {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {t} entries, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if let Some((ln, _)) = it.next() {
        return Err(Error::Parse {
            line: ln,
            msg: "trailing content".into(),
        });
    }
    if rows.is_empty() {
        return Ok(IntMatrix::empty(t));
    }
    IntMatrix::from_rows(rows)
}

/// Parse `d t`, t rows of d coefficients, optional `constants:` line.
pub fn parse_system(src: &str) -> Result<LinearSystem> {
    let mut it = lines(src);
    let (d, t) = header(&mut it)?;
    let mut rows = Vec::with_capacity(t);
    let mut consts = vec![BigInt::zero(); t];
    for (ln, l) in it {
        if let Some(rest) = l.strip_prefix("constants:") {
            let c = ints(ln, rest)?;
            if c.len() != t {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {t} constants"),
                });
            }
            consts = c;
            continue;
        }
        let row = ints(ln, l)?;
        if row.len() != d {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {d} coefficients, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.len() != t {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {t} forms, found {}", rows.len()),
        });
    }
    let m = if rows.is_empty() {
        IntMatrix::empty(d)
    } else {
        IntMatrix::from_rows(rows)?
    };
    LinearSystem::new(m, consts, Ambient::Integers)
}

/// Newline-separated integers.
pub fn parse_set(src: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (ln, l) in lines(src) {
        for w in l.split_whitespace() {
            out.push(w.parse::<i64>().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("not an integer: {w:?}"),
            })?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn format_matrix(m: &IntMatrix) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let r: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        s.push_str(&r.join(" "));
        s.push('\n');
    }
    s
}
