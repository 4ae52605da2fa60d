//! Persistent homology over Z/2 by column reduction.
//!
//! Columns are reduced from the top dimension down; whenever a column of
//! dimension `d` ends with pivot `i`, column `i` (dimension `d - 1`) is known
//! to reduce to zero and is skipped ("clearing").

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::complex::{face_without, FilteredCliqueComplex};
use crate::error::{Error, Result};

/// Column `j` holds the sorted row indices of the facets of simplex `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    pub columns: Vec<Vec<usize>>,
    pub dims: Vec<usize>,
}

pub fn boundary_matrix(complex: &FilteredCliqueComplex) -> Result<BoundaryMatrix> {
    let simplices = complex.simplices();
    let position: HashMap<&[u32], usize> = simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.as_slice(), i))
        .collect();
    let mut columns = Vec::with_capacity(simplices.len());
    let mut dims = Vec::with_capacity(simplices.len());
    for (j, s) in simplices.iter().enumerate() {
        dims.push(s.dim());
        if s.vertices.len() < 2 {
            columns.push(Vec::new());
            continue;
        }
        let mut col = Vec::with_capacity(s.vertices.len());
        for skip in 0..s.vertices.len() {
            let face = face_without(&s.vertices, skip);
            match position.get(face.as_slice()) {
                Some(&i) if i < j => col.push(i),
                _ => {
                    return Err(Error::MissingFace {
                        simplex: s.vertices.clone(),
                    })
                }
            }
        }
        col.sort_unstable();
        columns.push(col);
    }
    Ok(BoundaryMatrix { columns, dims })
}

/// A persistence interval. `death == None` means the class never dies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub dim: usize,
    pub birth: f64,
    pub death: Option<f64>,
    /// Index of the creating simplex in filtration order.
    pub creator: usize,
    /// Index of the destroying simplex, if any.
    pub destroyer: Option<usize>,
}

impl Interval {
    pub fn alive_at(&self, level: f64) -> bool {
        self.birth <= level && self.death.is_none_or(|d| d > level)
    }

    /// Alive at `lo` and still alive at `hi`.
    pub fn spans(&self, lo: f64, hi: f64) -> bool {
        self.birth <= lo && self.death.is_none_or(|d| d > hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barcode {
    /// Intervals of every dimension `<= exact_through`, by creator index.
    pub intervals: Vec<Interval>,
    pub exact_through: usize,
}

impl Barcode {
    pub fn of_dim(&self, dim: usize) -> impl Iterator<Item = &Interval> + '_ {
        self.intervals.iter().filter(move |iv| iv.dim == dim)
    }

    /// One interval per line: `dim birth death`, with `inf` for essential
    /// classes. Zero-length intervals are omitted.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for iv in &self.intervals {
            match iv.death {
                Some(d) if d == iv.birth => {}
                Some(d) => writeln!(out, "{} {:.17e} {:.17e}", iv.dim, iv.birth, d)?,
                None => writeln!(out, "{} {:.17e} inf", iv.dim, iv.birth)?,
            }
        }
        Ok(())
    }
}

/// Column reduction with clearing. Returns `pivot_of[j] = Some(i)` when the
/// reduced column `j` has lowest entry `i`.
pub fn reduce(matrix: &BoundaryMatrix) -> Vec<Option<usize>> {
    let n = matrix.columns.len();
    let top = matrix.dims.iter().copied().max().unwrap_or(0);
    let mut pivot_of: Vec<Option<usize>> = vec![None; n];
    let mut owner_of_row: Vec<usize> = vec![usize::MAX; n];
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut cleared = vec![false; n];

    for dim in (1..=top).rev() {
        for j in 0..n {
            if matrix.dims[j] != dim || cleared[j] {
                continue;
            }
            let mut col = matrix.columns[j].clone();
            while let Some(&low) = col.last() {
                let owner = owner_of_row[low];
                if owner == usize::MAX {
                    break;
                }
                col = symmetric_difference(&col, &reduced[owner]);
            }
            if let Some(&low) = col.last() {
                owner_of_row[low] = j;
                pivot_of[j] = Some(low);
                cleared[low] = true;
                reduced[j] = col;
            }
        }
    }
    pivot_of
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Full barcode of the filtration in every dimension the complex determines.
pub fn barcode(complex: &FilteredCliqueComplex) -> Result<Barcode> {
    let matrix = boundary_matrix(complex)?;
    let pivot_of = reduce(&matrix);
    let filtration: Vec<f64> = complex.simplices().iter().map(|s| s.filtration).collect();
    let n = filtration.len();

    let mut killed_by = vec![None; n];
    for (j, p) in pivot_of.iter().enumerate() {
        if let Some(i) = *p {
            killed_by[i] = Some(j);
        }
    }
    let exact_through = complex.exact_through();
    let mut intervals = Vec::new();
    for i in 0..n {
        let dim = matrix.dims[i];
        // Negative simplices destroy classes; they create none.
        if pivot_of[i].is_some() || dim > exact_through {
            continue;
        }
        intervals.push(Interval {
            dim,
            birth: filtration[i],
            death: killed_by[i].map(|j| filtration[j]),
            creator: i,
            destroyer: killed_by[i],
        });
    }
    Ok(Barcode {
        intervals,
        exact_through,
    })
}

fn check_top_dim(complex: &FilteredCliqueComplex, top_dim: usize) -> Result<()> {
    if top_dim > complex.exact_through() {
        return Err(Error::InvalidInput(format!(
            "H_{top_dim} needs simplices of dimension {}; the complex stops at {}",
            top_dim + 1,
            complex.exact_through() + 1
        )));
    }
    Ok(())
}

/// Betti numbers of the subcomplex at `level`, dimensions `0..=top_dim`.
pub fn betti_numbers(
    complex: &FilteredCliqueComplex,
    level: f64,
    top_dim: usize,
) -> Result<Vec<usize>> {
    check_top_dim(complex, top_dim)?;
    let bars = barcode(complex)?;
    Ok((0..=top_dim)
        .map(|d| bars.of_dim(d).filter(|iv| iv.alive_at(level)).count())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRankResult {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Rank of `H_i(K_lo) -> H_i(K_hi)` for `i = 0..=top_dim`.
    pub image_ranks: Vec<usize>,
    pub betti_lo: Vec<usize>,
    pub betti_hi: Vec<usize>,
    #[serde(skip)]
    pub barcode: Barcode,
}

/// Ranks of the maps induced on homology by the inclusion of the complex at
/// `alpha_lo` into the complex at `alpha_hi`.
pub fn persistent_image_rank(
    complex: &FilteredCliqueComplex,
    top_dim: usize,
) -> Result<ImageRankResult> {
    check_top_dim(complex, top_dim)?;
    let bars = barcode(complex)?;
    let (lo, hi) = (complex.alpha_lo(), complex.alpha_hi());
    let count = |pred: &dyn Fn(&Interval) -> bool| -> Vec<usize> {
        (0..=top_dim)
            .map(|d| bars.of_dim(d).filter(|iv| pred(iv)).count())
            .collect()
    };
    Ok(ImageRankResult {
        alpha_lo: lo,
        alpha_hi: hi,
        image_ranks: count(&|iv| iv.spans(lo, hi)),
        betti_lo: count(&|iv| iv.alive_at(lo)),
        betti_hi: count(&|iv| iv.alive_at(hi)),
        barcode: bars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complex(simplices: &[(&[u32], f64)], lo: f64, hi: f64) -> FilteredCliqueComplex {
        FilteredCliqueComplex::from_simplices(
            simplices.iter().map(|(v, f)| (v.to_vec(), *f)).collect(),
            lo,
            hi,
        )
        .unwrap()
    }

    fn hollow_triangle() -> Vec<(&'static [u32], f64)> {
        vec![
            (&[0], 0.0),
            (&[1], 0.0),
            (&[2], 0.0),
            (&[0, 1], 0.0),
            (&[0, 2], 0.0),
            (&[1, 2], 0.0),
        ]
    }

    #[test]
    fn triangle_betti_numbers() {
        let hollow = complex(&hollow_triangle(), 0.0, 0.0);
        assert_eq!(betti_numbers(&hollow, 0.0, 1).unwrap(), vec![1, 1]);

        let mut filled = hollow_triangle();
        filled.push((&[0, 1, 2], 0.0));
        let filled = complex(&filled, 0.0, 0.0);
        assert_eq!(betti_numbers(&filled, 0.0, 1).unwrap(), vec![1, 0]);
    }

    #[test]
    fn tetrahedron_boundary() {
        let mut s: Vec<(Vec<u32>, f64)> = Vec::new();
        for v in 0..4u32 {
            s.push((vec![v], 0.0));
        }
        for a in 0..4u32 {
            for b in a + 1..4 {
                s.push((vec![a, b], 0.0));
                for c in b + 1..4 {
                    s.push((vec![a, b, c], 0.0));
                }
            }
        }
        let k = FilteredCliqueComplex::from_simplices(s, 0.0, 0.0).unwrap();
        assert_eq!(betti_numbers(&k, 0.0, 2).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn boundary_columns() {
        let edge = complex(&[(&[0], 0.0), (&[1], 0.0), (&[0, 1], 0.0)], 0.0, 0.0);
        let m = boundary_matrix(&edge).unwrap();
        assert_eq!(m.columns[2], vec![0, 1]);

        let mut filled = hollow_triangle();
        filled.push((&[0, 1, 2], 0.0));
        let m = boundary_matrix(&complex(&filled, 0.0, 0.0)).unwrap();
        assert_eq!(m.columns[6], vec![3, 4, 5]);
    }

    #[test]
    fn identity_inclusion() {
        let k = complex(&hollow_triangle(), 0.3, 0.6);
        let r = persistent_image_rank(&k, 1).unwrap();
        assert_eq!(r.image_ranks, vec![1, 1]);
        assert_eq!(r.betti_lo, r.image_ranks);
        assert_eq!(r.betti_hi, r.image_ranks);
    }

    #[test]
    fn cycle_filled_between_levels() {
        let k = complex(
            &[
                (&[0], 0.0),
                (&[1], 0.0),
                (&[2], 0.0),
                (&[0, 1], 0.2),
                (&[0, 2], 0.2),
                (&[1, 2], 0.2),
                (&[0, 1, 2], 0.5),
            ],
            0.3,
            0.6,
        );
        let r = persistent_image_rank(&k, 1).unwrap();
        assert_eq!(r.image_ranks, vec![1, 0]);
        assert_eq!(r.betti_lo, vec![1, 1]);
        assert_eq!(r.betti_hi, vec![1, 0]);
        let h1: Vec<_> = r.barcode.of_dim(1).collect();
        assert_eq!(h1.len(), 1);
        assert_eq!((h1[0].birth, h1[0].death), (0.2, Some(0.5)));
    }

    #[test]
    fn top_dimension_must_be_supported() {
        let k = complex(&hollow_triangle(), 0.0, 0.0);
        assert!(betti_numbers(&k, 0.0, 3).is_ok());
        let rows = [[0.0, 0.0], [1.0, 0.0]];
        let c = crate::geometry::PointCloud::from_rows(&rows, 1).unwrap();
        let k = crate::complex::build_two_scale_complex(
            &c,
            &[1.0, 1.0],
            crate::complex::ComplexParams::two_level(0.5, 1.0, 1),
        )
        .unwrap();
        assert!(betti_numbers(&k, 1.0, 1).is_err());
        assert_eq!(betti_numbers(&k, 1.0, 0).unwrap(), vec![1]);
    }
}
