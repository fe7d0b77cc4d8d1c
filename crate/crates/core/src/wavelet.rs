//! Linear, exactly invertible multiresolution transform on regular quad
//! grids with subdivision connectivity, built from separable 1D lifting
//! steps (split, predict, update).
//!
//! Filter choice: the predict step interpolates each odd sample from its
//! four even neighbors with the cubic weights (-1/16, 9/16, 9/16, -1/16),
//! degrading to the two-point linear average where the stencil would leave
//! the line; the update step adds a quarter of the two adjacent details to
//! each even sample, mirrored at the ends. Both steps reproduce affine data
//! exactly (zero details), invert exactly, and keep compact support; those
//! three properties are the contract, the taps themselves are an
//! implementation choice.
//!
//! Coefficient order is frozen: the coarse scaling block first (row-major),
//! then detail bands from the coarsest level to the finest, each level in
//! kind order horizontal, vertical, diagonal, row-major inside a band. The
//! order is written into model files, so it must never change.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::Vec3;
use crate::grid::{base_segments, QuadGridShape};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum WaveletError {
    #[error("grid {rows}x{cols} does not have subdivision connectivity for {levels} levels")]
    BadGridDimensions {
        rows: usize,
        cols: usize,
        levels: usize,
    },
    #[error("coefficient count {got} does not match the declared grid ({expected})")]
    InconsistentDimensions { expected: usize, got: usize },
    #[error("coefficient index {index} out of range ({count} coefficients)")]
    IndexOutOfRange { index: usize, count: usize },
}

/// Values the lifting steps can process; the transform treats every
/// coordinate channel identically, so scalars and 3-vectors share one code
/// path.
pub trait LiftValue:
    Copy
    + core::ops::Add<Output = Self>
    + core::ops::Sub<Output = Self>
    + core::ops::Mul<f64, Output = Self>
{
    const ZERO: Self;
}

impl LiftValue for f64 {
    const ZERO: f64 = 0.0;
}

impl LiftValue for Vec3 {
    const ZERO: Vec3 = Vec3::ZERO;
}

/// Which band a coefficient belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoeffKind {
    /// Coarse scaling block (level 0).
    Scaling,
    /// Detail along the column axis (rows low-pass).
    DetailHorizontal,
    /// Detail along the row axis (columns low-pass).
    DetailVertical,
    /// Detail along both axes.
    DetailDiagonal,
}

impl CoeffKind {
    pub fn tag(self) -> &'static str {
        match self {
            CoeffKind::Scaling => "S",
            CoeffKind::DetailHorizontal => "H",
            CoeffKind::DetailVertical => "V",
            CoeffKind::DetailDiagonal => "D",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            CoeffKind::Scaling => 0,
            CoeffKind::DetailHorizontal => 1,
            CoeffKind::DetailVertical => 2,
            CoeffKind::DetailDiagonal => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<CoeffKind> {
        Some(match code {
            0 => CoeffKind::Scaling,
            1 => CoeffKind::DetailHorizontal,
            2 => CoeffKind::DetailVertical,
            3 => CoeffKind::DetailDiagonal,
            _ => return None,
        })
    }
}

/// Inclusive row/column bounds on the full grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridRect {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

/// Per-coefficient metadata derived from the frozen layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoeffMeta {
    /// 0 for the scaling block, 1..=levels for detail bands (1 = coarsest).
    pub level: usize,
    pub kind: CoeffKind,
    /// Position inside the band.
    pub band_row: usize,
    pub band_col: usize,
    /// Conservative bounding box of the coefficient's influence.
    pub bounds: GridRect,
}

/// The frozen coefficient layout for one template geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaveletLayout {
    rows: usize,
    cols: usize,
    levels: usize,
    row_segments: usize,
    col_segments: usize,
}

/// Identifier of the canonical ordering, stored in model files.
pub const ORDERING_TAG: &str = "coarse-first;level-major;HVD;row-major;v1";

impl WaveletLayout {
    pub fn new(rows: usize, cols: usize, levels: usize) -> Result<Self, WaveletError> {
        if levels == 0 {
            return Err(WaveletError::BadGridDimensions { rows, cols, levels });
        }
        let (Some(row_segments), Some(col_segments)) =
            (base_segments(rows, levels), base_segments(cols, levels))
        else {
            return Err(WaveletError::BadGridDimensions { rows, cols, levels });
        };
        Ok(Self {
            rows,
            cols,
            levels,
            row_segments,
            col_segments,
        })
    }

    pub fn for_shape(shape: &QuadGridShape) -> Self {
        Self::new(shape.rows(), shape.cols(), shape.levels())
            .expect("QuadGridShape guarantees subdivision connectivity")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Coarsest scaling grid height (`a + 1`).
    pub fn base_rows(&self) -> usize {
        self.row_segments + 1
    }

    pub fn base_cols(&self) -> usize {
        self.col_segments + 1
    }

    pub fn coefficient_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Active line lengths at a pyramid level.
    pub fn dims_at(&self, level: usize) -> (usize, usize) {
        (
            (self.row_segments << level) + 1,
            (self.col_segments << level) + 1,
        )
    }

    /// Canonical indices of all coefficients at `level` (0 = scaling block);
    /// the layout keeps each level contiguous.
    pub fn level_range(&self, level: usize) -> core::ops::Range<usize> {
        let (r0, c0) = self.dims_at(0);
        if level == 0 {
            return 0..r0 * c0;
        }
        let (rp, cp) = self.dims_at(level - 1);
        let (rl, cl) = self.dims_at(level);
        (rp * cp)..(rl * cl)
    }

    fn band_dims(&self, level: usize, kind: CoeffKind) -> (usize, usize) {
        if level == 0 {
            return self.dims_at(0);
        }
        let (rp, cp) = self.dims_at(level - 1);
        let (rl, cl) = self.dims_at(level);
        match kind {
            CoeffKind::Scaling => (rp, cp),
            CoeffKind::DetailHorizontal => (rp, cl - cp),
            CoeffKind::DetailVertical => (rl - rp, cp),
            CoeffKind::DetailDiagonal => (rl - rp, cl - cp),
        }
    }

    /// Decomposes a canonical index into (level, kind, band_row, band_col).
    pub fn locate(&self, k: usize) -> Result<(usize, CoeffKind, usize, usize), WaveletError> {
        let count = self.coefficient_count();
        if k >= count {
            return Err(WaveletError::IndexOutOfRange { index: k, count });
        }
        let (r0, c0) = self.dims_at(0);
        let mut offset = r0 * c0;
        if k < offset {
            return Ok((0, CoeffKind::Scaling, k / c0, k % c0));
        }
        for level in 1..=self.levels {
            for kind in [
                CoeffKind::DetailHorizontal,
                CoeffKind::DetailVertical,
                CoeffKind::DetailDiagonal,
            ] {
                let (br, bc) = self.band_dims(level, kind);
                let size = br * bc;
                if k < offset + size {
                    let rel = k - offset;
                    return Ok((level, kind, rel / bc, rel % bc));
                }
                offset += size;
            }
        }
        unreachable!("index below coefficient_count must fall into a band")
    }

    /// Position of a coefficient in the packed working grid of the lifting
    /// sweeps (coarse block tucked into the top-left corner at every level).
    pub fn packed_index(&self, level: usize, kind: CoeffKind, i: usize, j: usize) -> usize {
        if level == 0 {
            return i * self.cols + j;
        }
        let (rp, cp) = self.dims_at(level - 1);
        let (r, c) = match kind {
            CoeffKind::Scaling => (i, j),
            CoeffKind::DetailHorizontal => (i, cp + j),
            CoeffKind::DetailVertical => (rp + i, j),
            CoeffKind::DetailDiagonal => (rp + i, cp + j),
        };
        r * self.cols + c
    }

    pub fn meta(&self, k: usize) -> Result<CoeffMeta, WaveletError> {
        let (level, kind, band_row, band_col) = self.locate(k)?;
        Ok(CoeffMeta {
            level,
            kind,
            band_row,
            band_col,
            bounds: self.bounds(level, kind, band_row, band_col),
        })
    }

    fn bounds(&self, level: usize, kind: CoeffKind, i: usize, j: usize) -> GridRect {
        let (row0, row1) = self.axis_bounds(level, kind, i, Axis::Row);
        let (col0, col1) = self.axis_bounds(level, kind, j, Axis::Col);
        GridRect {
            row0,
            row1,
            col0,
            col1,
        }
    }

    fn axis_bounds(
        &self,
        level: usize,
        kind: CoeffKind,
        pos: usize,
        axis: Axis,
    ) -> (usize, usize) {
        let full_len = match axis {
            Axis::Row => self.rows,
            Axis::Col => self.cols,
        };
        let is_detail = matches!(
            (axis, kind),
            (Axis::Row, CoeffKind::DetailVertical)
                | (Axis::Row, CoeffKind::DetailDiagonal)
                | (Axis::Col, CoeffKind::DetailHorizontal)
                | (Axis::Col, CoeffKind::DetailDiagonal)
        );
        // low-pass positions live on the level-1 grid of their band
        let (mut lo, mut hi, mut at_level) = if is_detail {
            // one synthesis step of a unit detail reaches [2p-3, 2p+5]
            (2 * pos as isize - 3, 2 * pos as isize + 5, level)
        } else {
            (pos as isize, pos as isize, level.saturating_sub(1))
        };
        while at_level < self.levels {
            lo = 2 * lo - 3;
            hi = 2 * hi + 3;
            at_level += 1;
        }
        (
            lo.clamp(0, full_len as isize - 1) as usize,
            hi.clamp(0, full_len as isize - 1) as usize,
        )
    }
}

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

/// Hierarchical wavelet coefficients of one shape, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoefficients {
    layout: WaveletLayout,
    coeffs: Vec<Vec3>,
}

impl WaveletCoefficients {
    pub fn from_parts(layout: WaveletLayout, coeffs: Vec<Vec3>) -> Result<Self, WaveletError> {
        if coeffs.len() != layout.coefficient_count() {
            return Err(WaveletError::InconsistentDimensions {
                expected: layout.coefficient_count(),
                got: coeffs.len(),
            });
        }
        Ok(Self { layout, coeffs })
    }

    pub fn layout(&self) -> &WaveletLayout {
        &self.layout
    }

    pub fn levels(&self) -> usize {
        self.layout.levels
    }

    pub fn base_rows(&self) -> usize {
        self.layout.base_rows()
    }

    pub fn base_cols(&self) -> usize {
        self.layout.base_cols()
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec3] {
        &mut self.coeffs
    }

    pub fn meta(&self, k: usize) -> Result<CoeffMeta, WaveletError> {
        self.layout.meta(k)
    }

    pub fn into_coeffs(self) -> Vec<Vec3> {
        self.coeffs
    }
}

const CUBIC_OUTER: f64 = -1.0 / 16.0;
const CUBIC_INNER: f64 = 9.0 / 16.0;

#[inline]
fn predict<T: LiftValue>(evens: &[T], j: usize, m: usize) -> T {
    if j >= 1 && j + 2 <= m {
        evens[j - 1] * CUBIC_OUTER
            + evens[j] * CUBIC_INNER
            + evens[j + 1] * CUBIC_INNER
            + evens[j + 2] * CUBIC_OUTER
    } else {
        (evens[j] + evens[j + 1]) * 0.5
    }
}

/// One analysis level over `line` (odd length >= 3): packs the updated even
/// samples first, the detail samples after them.
fn analyze_line<T: LiftValue>(line: &mut [T], evens: &mut Vec<T>, details: &mut Vec<T>) {
    let n = line.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let m = (n - 1) / 2;
    evens.clear();
    evens.extend((0..=m).map(|i| line[2 * i]));
    details.clear();
    details.extend((0..m).map(|j| line[2 * j + 1] - predict(evens, j, m)));
    for i in 0..=m {
        let dl = details[if i == 0 { 0 } else { i - 1 }];
        let dr = details[if i == m { m - 1 } else { i }];
        evens[i] = evens[i] + (dl + dr) * 0.25;
    }
    line[..=m].copy_from_slice(evens);
    line[m + 1..].copy_from_slice(details);
}

/// Exact inverse of [`analyze_line`].
fn synthesize_line<T: LiftValue>(line: &mut [T], evens: &mut Vec<T>, details: &mut Vec<T>) {
    let n = line.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let m = (n - 1) / 2;
    evens.clear();
    evens.extend_from_slice(&line[..=m]);
    details.clear();
    details.extend_from_slice(&line[m + 1..]);
    for i in 0..=m {
        let dl = details[if i == 0 { 0 } else { i - 1 }];
        let dr = details[if i == m { m - 1 } else { i }];
        evens[i] = evens[i] - (dl + dr) * 0.25;
    }
    for j in 0..m {
        line[2 * j + 1] = details[j] + predict(evens, j, m);
    }
    for i in 0..=m {
        line[2 * i] = evens[i];
    }
}

struct LineBufs<T> {
    line: Vec<T>,
    evens: Vec<T>,
    details: Vec<T>,
}

impl<T: LiftValue> LineBufs<T> {
    fn new(cap: usize) -> Self {
        Self {
            line: vec![T::ZERO; cap],
            evens: Vec::with_capacity(cap / 2 + 1),
            details: Vec::with_capacity(cap / 2 + 1),
        }
    }
}

fn sweep_rows<T: LiftValue>(
    buf: &mut [T],
    cols: usize,
    active_rows: usize,
    active_cols: usize,
    bufs: &mut LineBufs<T>,
    analyze: bool,
) {
    for r in 0..active_rows {
        let row = &mut buf[r * cols..r * cols + active_cols];
        if analyze {
            analyze_line(row, &mut bufs.evens, &mut bufs.details);
        } else {
            synthesize_line(row, &mut bufs.evens, &mut bufs.details);
        }
    }
}

fn sweep_cols<T: LiftValue>(
    buf: &mut [T],
    cols: usize,
    active_rows: usize,
    active_cols: usize,
    bufs: &mut LineBufs<T>,
    analyze: bool,
) {
    for c in 0..active_cols {
        for r in 0..active_rows {
            bufs.line[r] = buf[r * cols + c];
        }
        let line = &mut bufs.line[..active_rows];
        if analyze {
            analyze_line(line, &mut bufs.evens, &mut bufs.details);
        } else {
            synthesize_line(line, &mut bufs.evens, &mut bufs.details);
        }
        for r in 0..active_rows {
            buf[r * cols + c] = bufs.line[r];
        }
    }
}

/// In-place packed multiresolution analysis of a row-major buffer.
pub fn forward_packed<T: LiftValue>(layout: &WaveletLayout, buf: &mut [T]) {
    debug_assert_eq!(buf.len(), layout.coefficient_count());
    let mut bufs = LineBufs::new(layout.rows.max(layout.cols));
    for level in (1..=layout.levels).rev() {
        let (r, c) = layout.dims_at(level);
        sweep_rows(buf, layout.cols, r, c, &mut bufs, true);
        sweep_cols(buf, layout.cols, r, c, &mut bufs, true);
    }
}

/// Exact inverse of [`forward_packed`].
pub fn inverse_packed<T: LiftValue>(layout: &WaveletLayout, buf: &mut [T]) {
    debug_assert_eq!(buf.len(), layout.coefficient_count());
    let mut bufs = LineBufs::new(layout.rows.max(layout.cols));
    for level in 1..=layout.levels {
        let (r, c) = layout.dims_at(level);
        sweep_cols(buf, layout.cols, r, c, &mut bufs, false);
        sweep_rows(buf, layout.cols, r, c, &mut bufs, false);
    }
}

/// Permutation taking canonical coefficient indices to packed-grid indices.
pub fn canonical_to_packed(layout: &WaveletLayout) -> Vec<u32> {
    let n = layout.coefficient_count();
    let mut map = Vec::with_capacity(n);
    let (r0, c0) = layout.dims_at(0);
    for i in 0..r0 {
        for j in 0..c0 {
            map.push(layout.packed_index(0, CoeffKind::Scaling, i, j) as u32);
        }
    }
    for level in 1..=layout.levels {
        for kind in [
            CoeffKind::DetailHorizontal,
            CoeffKind::DetailVertical,
            CoeffKind::DetailDiagonal,
        ] {
            let (br, bc) = layout.band_dims(level, kind);
            for i in 0..br {
                for j in 0..bc {
                    map.push(layout.packed_index(level, kind, i, j) as u32);
                }
            }
        }
    }
    debug_assert_eq!(map.len(), n);
    map
}

/// Canonical-order analysis of raw positions.
pub fn forward_positions(layout: &WaveletLayout, positions: &[Vec3]) -> Vec<Vec3> {
    let mut packed = positions.to_vec();
    forward_packed(layout, &mut packed);
    let map = canonical_to_packed(layout);
    map.iter().map(|&p| packed[p as usize]).collect()
}

/// Canonical-order synthesis back to raw positions.
pub fn inverse_positions(layout: &WaveletLayout, coeffs: &[Vec3]) -> Vec<Vec3> {
    let map = canonical_to_packed(layout);
    let mut packed = vec![Vec3::ZERO; coeffs.len()];
    for (k, &p) in map.iter().enumerate() {
        packed[p as usize] = coeffs[k];
    }
    inverse_packed(layout, &mut packed);
    packed
}

/// Wavelet analysis of a shape. Linear, Θ(n), exactly invertible.
pub fn forward(shape: &QuadGridShape) -> Result<WaveletCoefficients, WaveletError> {
    let layout = WaveletLayout::new(shape.rows(), shape.cols(), shape.levels())?;
    let coeffs = forward_positions(&layout, shape.positions());
    Ok(WaveletCoefficients { layout, coeffs })
}

/// Wavelet synthesis; the exact inverse of [`forward`].
pub fn inverse(coeffs: &WaveletCoefficients) -> Result<QuadGridShape, WaveletError> {
    let positions = inverse_positions(&coeffs.layout, &coeffs.coeffs);
    QuadGridShape::new(
        coeffs.layout.rows,
        coeffs.layout.cols,
        coeffs.layout.levels,
        positions,
    )
    .map_err(|_| WaveletError::InconsistentDimensions {
        expected: coeffs.layout.coefficient_count(),
        got: coeffs.coeffs.len(),
    })
}

/// Exact influence set of one coefficient: the vertices whose positions
/// change when the coefficient is perturbed, with the (scalar) response of
/// each vertex to a unit perturbation.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSupport {
    pub vertices: Vec<u32>,
    pub responses: Vec<f64>,
}

impl CoefficientSupport {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.vertices
            .iter()
            .map(|&v| v as usize)
            .zip(self.responses.iter().copied())
    }
}

const RESPONSE_CUTOFF_REL: f64 = 1e-12;

/// 1D synthesis response of a unit scaling coefficient at `pos` on the
/// level-`level` line, cascaded to the full line length.
fn scaling_response_1d(segments: usize, levels: usize, level: usize, pos: usize) -> Vec<f64> {
    let len_at = |l: usize| (segments << l) + 1;
    let mut values = vec![0.0f64; len_at(level)];
    values[pos] = 1.0;
    let mut evens = Vec::new();
    let mut details = Vec::new();
    for l in level..levels {
        let next = len_at(l + 1);
        let mut line = vec![0.0f64; next];
        let m = (next - 1) / 2;
        line[..=m].copy_from_slice(&values);
        synthesize_line(&mut line, &mut evens, &mut details);
        values = line;
    }
    values
}

/// 1D synthesis response of a unit detail coefficient at `pos` on the
/// level-`level` band, cascaded to the full line length.
fn detail_response_1d(segments: usize, levels: usize, level: usize, pos: usize) -> Vec<f64> {
    let len_at = |l: usize| (segments << l) + 1;
    let len = len_at(level);
    let m = (len - 1) / 2;
    let mut line = vec![0.0f64; len];
    line[m + 1 + pos] = 1.0;
    let mut evens = Vec::new();
    let mut details = Vec::new();
    synthesize_line(&mut line, &mut evens, &mut details);
    let mut values = line;
    for l in level..levels {
        let next = len_at(l + 1);
        let mut line = vec![0.0f64; next];
        let mh = (next - 1) / 2;
        line[..=mh].copy_from_slice(&values);
        synthesize_line(&mut line, &mut evens, &mut details);
        values = line;
    }
    values
}

fn axis_response(
    layout: &WaveletLayout,
    level: usize,
    detail: bool,
    pos: usize,
    axis: Axis,
) -> Vec<f64> {
    let segments = match axis {
        Axis::Row => layout.row_segments,
        Axis::Col => layout.col_segments,
    };
    if detail {
        detail_response_1d(segments, layout.levels, level, pos)
    } else {
        scaling_response_1d(segments, layout.levels, level.saturating_sub(1), pos)
    }
}

fn nonzero_entries(resp: &[f64]) -> Vec<(usize, f64)> {
    let peak = resp.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = peak * RESPONSE_CUTOFF_REL;
    resp.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cutoff)
        .map(|(i, &v)| (i, v))
        .collect()
}

/// Influence set of coefficient `k` on the full grid.
///
/// The pyramid basis functions are separable, so the 2D response is the
/// outer product of two 1D synthesis responses; the tests pin this against
/// a literal unit-coefficient inverse transform.
pub fn coefficient_support(
    layout: &WaveletLayout,
    k: usize,
) -> Result<CoefficientSupport, WaveletError> {
    let (level, kind, band_row, band_col) = layout.locate(k)?;
    let (row_detail, col_detail) = match kind {
        CoeffKind::Scaling => (false, false),
        CoeffKind::DetailHorizontal => (false, true),
        CoeffKind::DetailVertical => (true, false),
        CoeffKind::DetailDiagonal => (true, true),
    };
    let row_resp = axis_response(layout, level, row_detail, band_row, Axis::Row);
    let col_resp = axis_response(layout, level, col_detail, band_col, Axis::Col);
    let row_nz = nonzero_entries(&row_resp);
    let col_nz = nonzero_entries(&col_resp);
    let mut vertices = Vec::with_capacity(row_nz.len() * col_nz.len());
    let mut responses = Vec::with_capacity(row_nz.len() * col_nz.len());
    for &(r, rv) in &row_nz {
        for &(c, cv) in &col_nz {
            vertices.push((r * layout.cols + c) as u32);
            responses.push(rv * cv);
        }
    }
    Ok(CoefficientSupport {
        vertices,
        responses,
    })
}

/// Influence sets for every coefficient. The 1D responses are shared by
/// whole band rows/columns, so they are memoized per axis; this keeps the
/// whole scan near-linear in the grid size.
pub fn compute_supports(layout: &WaveletLayout) -> Vec<CoefficientSupport> {
    use alloc::collections::BTreeMap;
    let mut row_memo: BTreeMap<(bool, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    let mut col_memo: BTreeMap<(bool, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    (0..layout.coefficient_count())
        .map(|k| {
            let (level, kind, band_row, band_col) = layout.locate(k).expect("index in range");
            let (row_detail, col_detail) = match kind {
                CoeffKind::Scaling => (false, false),
                CoeffKind::DetailHorizontal => (false, true),
                CoeffKind::DetailVertical => (true, false),
                CoeffKind::DetailDiagonal => (true, true),
            };
            let row_key = (row_detail, level, band_row);
            let col_key = (col_detail, level, band_col);
            row_memo.entry(row_key).or_insert_with(|| {
                nonzero_entries(&axis_response(layout, level, row_detail, band_row, Axis::Row))
            });
            col_memo.entry(col_key).or_insert_with(|| {
                nonzero_entries(&axis_response(layout, level, col_detail, band_col, Axis::Col))
            });
            let row_nz = &row_memo[&row_key];
            let col_nz = &col_memo[&col_key];
            let mut vertices = Vec::with_capacity(row_nz.len() * col_nz.len());
            let mut responses = Vec::with_capacity(row_nz.len() * col_nz.len());
            for &(r, rv) in row_nz {
                for &(c, cv) in col_nz {
                    vertices.push((r * layout.cols + c) as u32);
                    responses.push(rv * cv);
                }
            }
            CoefficientSupport {
                vertices,
                responses,
            }
        })
        .collect()
}
