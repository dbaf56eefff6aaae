use std::io::Write;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::basis::FockBasis;

/// Sparse complex operator on a fixed-particle-number basis.
///
/// Built from coordinate triplets, stored compressed by rows. Operators that
/// carry the `hermitian` flag store both triangles explicitly with exactly
/// conjugate entries.
#[derive(Debug, Clone)]
pub struct ChainOperator {
    basis: Arc<FockBasis>,
    kind: String,
    hermitian: bool,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
}

impl ChainOperator {
    /// Assemble from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        basis: Arc<FockBasis>,
        kind: impl Into<String>,
        hermitian: bool,
        mut triplets: Vec<(u32, u32, Complex64)>,
    ) -> Self {
        let dim = basis.dim();
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row = 0u32;
        for (r, c, v) in triplets {
            debug_assert!((r as usize) < dim && (c as usize) < dim);
            while row < r {
                indptr.push(cols.len());
                row += 1;
            }
            if let (Some(&last_c), true) = (cols.last(), indptr.len() == (r as usize) + 1) {
                if last_c == c && cols.len() > *indptr.last().unwrap() {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            cols.push(c);
            vals.push(v);
        }
        while (row as usize) < dim {
            indptr.push(cols.len());
            row += 1;
        }
        // drop exact zeros
        let mut op = ChainOperator { basis, kind: kind.into(), hermitian, indptr, cols, vals };
        op.prune_zeros();
        op
    }

    fn prune_zeros(&mut self) {
        let dim = self.dim();
        let mut indptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..dim {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.vals[k] != Complex64::new(0.0, 0.0) {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            indptr[i + 1] = cols.len();
        }
        self.indptr = indptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Bose-Hubbard Hamiltonian on the open chain:
    /// hopping -(J/2) sum (a'_{l+1} a_l + h.c.) plus on-site (U/2) sum n_l (n_l - 1).
    pub fn hamiltonian(basis: Arc<FockBasis>, hopping: f64, interaction: f64) -> Self {
        let mut trip = Vec::new();
        for (k, s) in basis.states().iter().enumerate() {
            let occ = s.occupations();
            let diag: f64 = occ.iter().map(|&n| (n as f64) * (n as f64 - 1.0)).sum();
            if diag != 0.0 {
                trip.push((k as u32, k as u32, Complex64::new(0.5 * interaction * diag, 0.0)));
            }
            for l in 0..basis.sites() - 1 {
                if occ[l] > 0 {
                    let (t, amp) = hop_right(&basis, occ, l);
                    let v = Complex64::new(-0.5 * hopping * amp, 0.0);
                    trip.push((t as u32, k as u32, v));
                    trip.push((k as u32, t as u32, v));
                }
            }
        }
        ChainOperator::from_triplets(basis, "hamiltonian", true, trip)
    }

    /// Total bond-current operator. The sign convention makes a positive
    /// eigenvalue a flow from site 1 toward site L, so that at U = 0 the
    /// identity -i[H, I] = J^2 (n_L - n_1)/2 holds exactly.
    pub fn current(basis: Arc<FockBasis>, hopping: f64) -> Self {
        let mut trip = Vec::new();
        for (k, s) in basis.states().iter().enumerate() {
            let occ = s.occupations();
            for l in 0..basis.sites() - 1 {
                if occ[l] > 0 {
                    let (t, amp) = hop_right(&basis, occ, l);
                    let v = Complex64::new(0.0, 0.5 * hopping * amp);
                    trip.push((t as u32, k as u32, v));
                    trip.push((k as u32, t as u32, v.conj()));
                }
            }
        }
        ChainOperator::from_triplets(basis, "current", true, trip)
    }

    /// Occupation-number operator of one site (1-based index).
    pub fn site_number(basis: Arc<FockBasis>, site: usize) -> Result<Self> {
        if site == 0 || site > basis.sites() {
            return Err(Error::SiteOutOfRange { site, sites: basis.sites() });
        }
        let trip = basis
            .states()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.occupations()[site - 1] > 0)
            .map(|(k, s)| {
                (k as u32, k as u32, Complex64::new(s.occupations()[site - 1] as f64, 0.0))
            })
            .collect();
        Ok(ChainOperator::from_triplets(basis, format!("number_{site}"), true, trip))
    }

    /// Jump operator moving one particle from the last site to the first,
    /// with the bosonic amplitude sqrt((n_1 + 1) n_L).
    pub fn jump(basis: Arc<FockBasis>) -> Result<Self> {
        if basis.sites() < 2 {
            return Err(Error::InvalidParams(
                "jump operator needs at least two sites".into(),
            ));
        }
        let last = basis.sites() - 1;
        let mut trip = Vec::new();
        for (k, s) in basis.states().iter().enumerate() {
            let occ = s.occupations();
            if occ[last] > 0 {
                let mut t = occ.to_vec();
                t[last] -= 1;
                t[0] += 1;
                let amp = ((occ[0] as f64 + 1.0) * occ[last] as f64).sqrt();
                let j = basis.index_of(&t).expect("move stays in the sector");
                trip.push((j as u32, k as u32, Complex64::new(amp, 0.0)));
            }
        }
        Ok(ChainOperator::from_triplets(basis, "jump", false, trip))
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.vals[r]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn dagger(&self) -> Self {
        let trip = self
            .iter_triplets()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        ChainOperator::from_triplets(
            self.basis.clone(),
            format!("{}_dagger", self.kind),
            self.hermitian,
            trip,
        )
    }

    pub fn iter_triplets(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            self.row(i).map(move |(c, v)| (i as u32, c as u32, v))
        })
    }

    /// Sparse product self * rhs.
    pub fn matmul(&self, rhs: &Self, kind: impl Into<String>, hermitian: bool) -> Result<Self> {
        if !self.basis.same_sector(&rhs.basis) {
            return Err(Error::BasisMismatch("operator product across sectors".into()));
        }
        let dim = self.dim();
        let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
        let mut touched: Vec<u32> = Vec::new();
        let mut trip = Vec::new();
        for i in 0..dim {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if scratch[j] == Complex64::new(0.0, 0.0) {
                        touched.push(j as u32);
                    }
                    scratch[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                let v = scratch[j as usize];
                if v != Complex64::new(0.0, 0.0) {
                    trip.push((i as u32, j, v));
                }
                scratch[j as usize] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(ChainOperator::from_triplets(self.basis.clone(), kind, hermitian, trip))
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let dim = self.dim();
        let mut out = Array2::zeros((dim, dim));
        for (r, c, v) in self.iter_triplets() {
            out[[r as usize, c as usize]] = v;
        }
        out
    }

    pub fn diagonal(&self) -> Array1<Complex64> {
        Array1::from_iter((0..self.dim()).map(|i| self.entry(i, i)))
    }

    /// Dense product self * R.
    pub fn apply_left(&self, r: &Array2<Complex64>) -> Array2<Complex64> {
        let dim = self.dim();
        assert_eq!(r.dim(), (dim, dim));
        let rs = r.as_slice().expect("standard layout");
        let mut out = Array2::zeros((dim, dim));
        {
            let os = out.as_slice_mut().unwrap();
            for i in 0..dim {
                let orow = &mut os[i * dim..(i + 1) * dim];
                for (k, a) in self.row(i) {
                    let rrow = &rs[k * dim..(k + 1) * dim];
                    for (o, &x) in orow.iter_mut().zip(rrow) {
                        *o += a * x;
                    }
                }
            }
        }
        out
    }

    /// Dense product R * self.
    pub fn apply_right(&self, r: &Array2<Complex64>) -> Array2<Complex64> {
        let dim = self.dim();
        assert_eq!(r.dim(), (dim, dim));
        let rs = r.as_slice().expect("standard layout");
        let mut out = Array2::zeros((dim, dim));
        {
            let os = out.as_slice_mut().unwrap();
            for i in 0..dim {
                let rrow = &rs[i * dim..(i + 1) * dim];
                let orow = &mut os[i * dim..(i + 1) * dim];
                for k in 0..dim {
                    let x = rrow[k];
                    if x != Complex64::new(0.0, 0.0) {
                        for (j, a) in self.row(k) {
                            orow[j] += x * a;
                        }
                    }
                }
            }
        }
        out
    }

    /// Matrix element <v|A|v>.
    pub fn expectation(&self, v: ArrayView1<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let mut row_acc = Complex64::new(0.0, 0.0);
            for (k, a) in self.row(i) {
                row_acc += a * v[k];
            }
            acc += v[i].conj() * row_acc;
        }
        acc
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max entrywise |A - A'| over the stored pattern.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (r, c, v) in self.iter_triplets() {
            dev = dev.max((v - self.entry(c as usize, r as usize).conj()).norm());
        }
        dev
    }

    /// Textual triplet export: header `# L N kind`, then one `row col re im`
    /// line per stored entry (0-based indices).
    pub fn export<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.basis.sites(), self.basis.particles(), self.kind)?;
        for (r, c, v) in self.iter_triplets() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }
}

fn hop_right(basis: &FockBasis, occ: &[u32], l: usize) -> (usize, f64) {
    let mut t = occ.to_vec();
    t[l] -= 1;
    t[l + 1] += 1;
    let amp = ((occ[l] as f64) * (occ[l + 1] as f64 + 1.0)).sqrt();
    let j = basis.index_of(&t).expect("hop stays in the sector");
    (j, amp)
}
