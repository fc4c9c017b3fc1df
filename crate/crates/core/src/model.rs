//! Semi-discrete eddy-current system `M_σ a' = −K_ν a + X_s i(t)` on a 2D
//! grid, its conducting / non-conducting partition and the Schur-complement
//! reduction to an ODE on the conducting unknowns.

use std::sync::OnceLock;

use sprs::TriMat;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region};
use crate::linalg::{self, EnvelopeCholesky, FactorError, SparseMatrix};

/// Vacuum reluctivity `1/μ₀` in m/H.
pub const NU_VACUUM: f64 = 1.0 / (4.0e-7 * std::f64::consts::PI);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Materials {
    /// Core conductivity (S/m).
    pub sigma_core: f64,
    /// Reluctivity of air and coil cells (m/H).
    pub nu_air: f64,
    /// Core reluctivity (m/H).
    pub nu_core: f64,
    /// Winding density (turns per m²).
    pub turns_per_area: f64,
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            sigma_core: 1.0e6,
            nu_air: NU_VACUUM,
            nu_core: NU_VACUUM / 1000.0,
            turns_per_area: 1.0e5,
        }
    }
}

impl Materials {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_core", self.sigma_core),
            ("nu_air", self.nu_air),
            ("nu_core", self.nu_core),
            ("turns_per_area", self.turns_per_area),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidMaterials(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn nu(&self, region: Region) -> f64 {
        match region {
            Region::Core => self.nu_core,
            _ => self.nu_air,
        }
    }

    fn sigma(&self, region: Region) -> f64 {
        match region {
            Region::Core => self.sigma_core,
            _ => 0.0,
        }
    }
}

/// Lumped mass `M_σ` (diagonal), stiffness `K_ν` and winding vector `X_s`.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    m_sigma: Vec<f64>,
    k_nu: SparseMatrix,
    x_s: Vec<f64>,
    idx_c: Vec<usize>,
    idx_nc: Vec<usize>,
}

impl SemiDiscreteSystem {
    /// Wraps raw matrices. Conducting dofs are those with `m_sigma > 0`.
    pub fn new(m_sigma: Vec<f64>, k_nu: SparseMatrix, x_s: Vec<f64>) -> Result<Self> {
        let n = m_sigma.len();
        if n == 0 {
            return Err(Error::Dimension("system has no degrees of freedom".into()));
        }
        if k_nu.rows() != n || k_nu.cols() != n || x_s.len() != n {
            return Err(Error::Dimension(format!(
                "M is {n}, K is {}x{}, X is {}",
                k_nu.rows(),
                k_nu.cols(),
                x_s.len()
            )));
        }
        if let Some(j) = m_sigma.iter().position(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Dimension(format!("mass entry {j} is negative or not finite")));
        }
        let k_nu = if k_nu.is_csr() { k_nu } else { k_nu.to_csr() };
        let scale = k_nu.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if linalg::asymmetry(&k_nu) > 1e-12 * scale {
            return Err(Error::Dimension("stiffness matrix is not symmetric".into()));
        }
        let (idx_c, idx_nc): (Vec<usize>, Vec<usize>) = (0..n).partition(|&j| m_sigma[j] > 0.0);
        Ok(Self {
            m_sigma,
            k_nu,
            x_s,
            idx_c,
            idx_nc,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.m_sigma.len()
    }

    pub fn m_sigma(&self) -> &[f64] {
        &self.m_sigma
    }

    pub fn k_nu(&self) -> &SparseMatrix {
        &self.k_nu
    }

    pub fn x_s(&self) -> &[f64] {
        &self.x_s
    }

    pub fn idx_c(&self) -> &[usize] {
        &self.idx_c
    }

    pub fn idx_nc(&self) -> &[usize] {
        &self.idx_nc
    }

    /// First conducting dof where the winding vector is nonzero, if any.
    /// The Schur reduction requires the winding to be non-conducting.
    pub fn conducting_winding_dof(&self) -> Option<usize> {
        self.idx_c.iter().copied().find(|&j| self.x_s[j] != 0.0)
    }

    /// Writes `M_sigma.mtx`, `K_nu.mtx` and `X_s.mtx` (Matrix Market
    /// coordinate format) into `dir`.
    pub fn write_matrix_market(&self, dir: &std::path::Path) -> std::io::Result<()> {
        let n = self.n_dof();
        let mut m = TriMat::new((n, n));
        let mut x = TriMat::new((n, 1));
        for j in 0..n {
            if self.m_sigma[j] != 0.0 {
                m.add_triplet(j, j, self.m_sigma[j]);
            }
            if self.x_s[j] != 0.0 {
                x.add_triplet(j, 0, self.x_s[j]);
            }
        }
        let m: SparseMatrix = m.to_csr();
        let x: SparseMatrix = x.to_csr();
        sprs::io::write_matrix_market(dir.join("M_sigma.mtx"), &m)?;
        sprs::io::write_matrix_market(dir.join("K_nu.mtx"), &self.k_nu)?;
        sprs::io::write_matrix_market(dir.join("X_s.mtx"), &x)
    }

    /// `y = K_ν x`
    pub fn apply_stiffness(&self, x: &[f64], y: &mut [f64]) {
        linalg::mul_vec(&self.k_nu, x, y);
    }
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Assembles the node-based 5-point discretization of the 2D eddy-current
/// problem for the out-of-plane vector potential.
///
/// Each grid edge couples its two nodes with weight `ν̃ · h_⊥ / h_∥`, where
/// `ν̃` is the harmonic mean of the reluctivities of the two cells sharing
/// the edge. Mass and winding entries are lumped over the node control
/// volume, a quarter of every adjacent cell.
pub fn assemble(grid: &Grid2D, mat: &Materials) -> Result<SemiDiscreteSystem> {
    mat.validate()?;
    let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
    if nx < 2 || ny < 2 {
        return Err(Error::Dimension(format!("{nx}x{ny} grid has no interior nodes")));
    }
    let n = grid.n_dof();
    let mut tri = TriMat::new((n, n));
    let mut couple = |p: Option<usize>, q: Option<usize>, w: f64| {
        if let Some(p) = p {
            tri.add_triplet(p, p, w);
        }
        if let Some(q) = q {
            tri.add_triplet(q, q, w);
        }
        if let (Some(p), Some(q)) = (p, q) {
            tri.add_triplet(p, q, -w);
            tri.add_triplet(q, p, -w);
        }
    };
    // Edges along x between (i, j) and (i+1, j), shared by cells (i, j-1) and (i, j).
    for j in 1..ny {
        for i in 0..nx {
            let nu = harmonic_mean(mat.nu(grid.region(i, j - 1)), mat.nu(grid.region(i, j)));
            couple(grid.dof(i, j), grid.dof(i + 1, j), nu * hy / hx);
        }
    }
    // Edges along y between (i, j) and (i, j+1), shared by cells (i-1, j) and (i, j).
    for i in 1..nx {
        for j in 0..ny {
            let nu = harmonic_mean(mat.nu(grid.region(i - 1, j)), mat.nu(grid.region(i, j)));
            couple(grid.dof(i, j), grid.dof(i, j + 1), nu * hx / hy);
        }
    }
    let k_nu: SparseMatrix = tri.to_csr();

    let quarter = 0.25 * hx * hy;
    let mut m_sigma = vec![0.0; n];
    let mut x_s = vec![0.0; n];
    for (dof, (m, x)) in m_sigma.iter_mut().zip(x_s.iter_mut()).enumerate() {
        let (i, j) = grid.node(dof);
        for (cx, cy) in grid.cells_around(i, j) {
            let region = grid.region(cx, cy);
            *m += mat.sigma(region) * quarter;
            *x += region.polarity() * mat.turns_per_area * quarter;
        }
    }
    let sys = SemiDiscreteSystem::new(m_sigma, k_nu, x_s)?;
    if let Some(j) = sys.conducting_winding_dof() {
        return Err(Error::InvalidGrid(format!(
            "coil cells share node {:?} with core cells",
            grid.node(j)
        )));
    }
    Ok(sys)
}

/// Block form of the system over the conducting (`c`) and non-conducting
/// (`nc`) unknowns.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    n_dof: usize,
    idx_c: Vec<usize>,
    idx_nc: Vec<usize>,
    mbar: Vec<f64>,
    k11: SparseMatrix,
    k12: SparseMatrix,
    k22: SparseMatrix,
    xbar: Vec<f64>,
}

impl PartitionedSystem {
    /// Builds a partition directly from blocks; conducting unknowns come
    /// first in the full numbering.
    pub fn from_blocks(
        mbar: Vec<f64>,
        k11: SparseMatrix,
        k12: SparseMatrix,
        k22: SparseMatrix,
        xbar: Vec<f64>,
    ) -> Result<Self> {
        let (nc, nn) = (mbar.len(), xbar.len());
        if nc == 0 {
            return Err(Error::NoConductingRegion);
        }
        if nn == 0 {
            return Err(Error::NoAlgebraicBlock);
        }
        let shapes_ok = k11.shape() == (nc, nc) && k12.shape() == (nc, nn) && k22.shape() == (nn, nn);
        if !shapes_ok {
            return Err(Error::Dimension(format!(
                "block shapes K11 {:?}, K12 {:?}, K22 {:?} do not match {nc}+{nn} unknowns",
                k11.shape(),
                k12.shape(),
                k22.shape()
            )));
        }
        if let Some(j) = mbar.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Dimension(format!("conducting mass entry {j} is not positive")));
        }
        let to_csr = |m: SparseMatrix| if m.is_csr() { m } else { m.to_csr() };
        Ok(Self {
            n_dof: nc + nn,
            idx_c: (0..nc).collect(),
            idx_nc: (nc..nc + nn).collect(),
            mbar,
            k11: to_csr(k11),
            k12: to_csr(k12),
            k22: to_csr(k22),
            xbar,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn idx_c(&self) -> &[usize] {
        &self.idx_c
    }

    pub fn idx_nc(&self) -> &[usize] {
        &self.idx_nc
    }

    pub fn mbar(&self) -> &[f64] {
        &self.mbar
    }

    pub fn k11(&self) -> &SparseMatrix {
        &self.k11
    }

    pub fn k12(&self) -> &SparseMatrix {
        &self.k12
    }

    pub fn k22(&self) -> &SparseMatrix {
        &self.k22
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    /// Conducting part of a full-length vector.
    pub fn gather_c(&self, full: &[f64]) -> Vec<f64> {
        self.idx_c.iter().map(|&j| full[j]).collect()
    }

    /// Non-conducting part of a full-length vector.
    pub fn gather_nc(&self, full: &[f64]) -> Vec<f64> {
        self.idx_nc.iter().map(|&j| full[j]).collect()
    }

    /// Full-length vector from its two parts.
    pub fn scatter(&self, a_c: &[f64], a_nc: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dof];
        for (&j, &v) in self.idx_c.iter().zip(a_c) {
            full[j] = v;
        }
        for (&j, &v) in self.idx_nc.iter().zip(a_nc) {
            full[j] = v;
        }
        full
    }
}

/// Splits the system by its conducting index set.
pub fn partition(sys: &SemiDiscreteSystem) -> Result<PartitionedSystem> {
    if sys.idx_c.is_empty() {
        return Err(Error::NoConductingRegion);
    }
    if sys.idx_nc.is_empty() {
        return Err(Error::NoAlgebraicBlock);
    }
    if let Some(j) = sys.conducting_winding_dof() {
        return Err(Error::Dimension(format!(
            "winding vector is nonzero on conducting dof {j}; it cannot be eliminated"
        )));
    }
    let (c, nc) = (&sys.idx_c, &sys.idx_nc);
    Ok(PartitionedSystem {
        n_dof: sys.n_dof(),
        idx_c: c.clone(),
        idx_nc: nc.clone(),
        mbar: c.iter().map(|&j| sys.m_sigma[j]).collect(),
        k11: linalg::submatrix(&sys.k_nu, c, c),
        k12: linalg::submatrix(&sys.k_nu, c, nc),
        k22: linalg::submatrix(&sys.k_nu, nc, nc),
        xbar: nc.iter().map(|&j| sys.x_s[j]).collect(),
    })
}

/// Partitioned system with a factorized `K22` and the precomputed reduced
/// winding vector `Ȳ = M̄⁻¹ K12 K22⁻¹ X̄`.
///
/// Eliminating the algebraic unknowns gives the conducting-region ODE
///
/// ```text
/// a_c' = −M̄⁻¹ S a_c − Ȳ i(t),     S = K11 − K12 K22⁻¹ K12ᵀ,
/// a_nc = K22⁻¹ (X̄ i(t) − K12ᵀ a_c).
/// ```
#[derive(Debug, Clone)]
pub struct SchurReducedSystem {
    part: PartitionedSystem,
    k22_chol: EnvelopeCholesky,
    ybar: Vec<f64>,
    pub(crate) stability: OnceLock<Result<f64>>,
}

/// Factorizes `K22` and precomputes `Ȳ`.
pub fn reduce_schur(part: PartitionedSystem) -> Result<SchurReducedSystem> {
    let k22_chol = EnvelopeCholesky::factor(&part.k22).map_err(|e| match e {
        FactorError::NotPositiveDefinite { .. } | FactorError::NotSymmetric { .. } => {
            Error::SingularStiffnessBlock(e.to_string())
        }
        FactorError::NotSquare { .. } => Error::Dimension(e.to_string()),
    })?;
    let z = k22_chol.solve(&part.xbar);
    let mut ybar = vec![0.0; part.mbar.len()];
    linalg::mul_vec(&part.k12, &z, &mut ybar);
    for (y, m) in ybar.iter_mut().zip(&part.mbar) {
        *y /= m;
    }
    Ok(SchurReducedSystem {
        part,
        k22_chol,
        ybar,
        stability: OnceLock::new(),
    })
}

impl SchurReducedSystem {
    pub fn partition(&self) -> &PartitionedSystem {
        &self.part
    }

    pub fn ybar(&self) -> &[f64] {
        &self.ybar
    }

    pub fn n_c(&self) -> usize {
        self.part.mbar.len()
    }

    pub fn n_nc(&self) -> usize {
        self.part.xbar.len()
    }

    /// `K22⁻¹ v`
    pub fn solve_k22(&self, v: &[f64]) -> Vec<f64> {
        self.k22_chol.solve(v)
    }

    /// `out = S a_c` without forming `S`.
    pub fn apply_schur(&self, a_c: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; self.n_nc()];
        linalg::mul_vec_transpose(&self.part.k12, a_c, &mut t);
        self.k22_chol.solve_in_place(&mut t);
        let mut coupling = vec![0.0; self.n_c()];
        linalg::mul_vec(&self.part.k12, &t, &mut coupling);
        linalg::mul_vec(&self.part.k11, a_c, out);
        for (o, c) in out.iter_mut().zip(&coupling) {
            *o -= c;
        }
    }

    /// Right-hand side of the reduced ODE, `−M̄⁻¹ S a_c − Ȳ i`.
    pub fn reduced_rhs(&self, a_c: &[f64], current: f64, out: &mut [f64]) {
        self.apply_schur(a_c, out);
        for ((o, m), y) in out.iter_mut().zip(&self.part.mbar).zip(&self.ybar) {
            *o = -*o / m - y * current;
        }
    }

    /// Non-conducting unknowns consistent with `a_c` and the current `i`.
    pub fn reconstruct_nc(&self, a_c: &[f64], current: f64) -> Result<Vec<f64>> {
        if a_c.len() != self.n_c() {
            return Err(Error::Dimension(format!(
                "a_c has length {}, expected {}",
                a_c.len(),
                self.n_c()
            )));
        }
        let mut rhs = vec![0.0; self.n_nc()];
        linalg::mul_vec_transpose(&self.part.k12, a_c, &mut rhs);
        for (r, x) in rhs.iter_mut().zip(&self.part.xbar) {
            *r = x * current - *r;
        }
        self.k22_chol.solve_in_place(&mut rhs);
        Ok(rhs)
    }

    /// Full-length state from `a_c`, with `a_nc` reconstructed.
    pub fn full_state(&self, a_c: &[f64], current: f64) -> Result<Vec<f64>> {
        let a_nc = self.reconstruct_nc(a_c, current)?;
        Ok(self.part.scatter(a_c, &a_nc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellRect;
    use crate::linalg::from_dense;

    fn two_dof() -> SemiDiscreteSystem {
        SemiDiscreteSystem::new(
            vec![1.0, 0.0],
            from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]),
            vec![0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn single_interior_node_all_air() {
        // 2x2 cells = 3x3 nodes, one interior node.
        let grid = Grid2D::uniform(2, 2, 1.0, 1.0).unwrap();
        let mat = Materials {
            nu_air: 1.0,
            ..Materials::default()
        };
        let sys = assemble(&grid, &mat).unwrap();
        assert_eq!(sys.n_dof(), 1);
        assert_eq!(sys.k_nu().to_dense()[[0, 0]], 4.0);
        assert_eq!(sys.m_sigma(), &[0.0]);
        assert_eq!(sys.x_s(), &[0.0]);
    }

    #[test]
    fn no_interior_nodes_is_a_dimension_error() {
        let grid = Grid2D::uniform(1, 4, 1.0, 1.0).unwrap();
        assert!(matches!(
            assemble(&grid, &Materials::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn no_core_means_zero_mass() {
        let mut grid = Grid2D::uniform(6, 5, 0.1, 0.2).unwrap();
        grid.paint(CellRect::new(1, 1, 2, 3), Region::CoilPlus).unwrap();
        let sys = assemble(&grid, &Materials::default()).unwrap();
        assert!(sys.m_sigma().iter().all(|&m| m == 0.0));
        assert!(sys.idx_c().is_empty());
        assert!(matches!(partition(&sys), Err(Error::NoConductingRegion)));
    }

    #[test]
    fn anisotropic_cells_scale_stencil() {
        let grid = Grid2D::uniform(2, 2, 2.0, 1.0).unwrap();
        let mat = Materials {
            nu_air: 3.0,
            ..Materials::default()
        };
        let sys = assemble(&grid, &mat).unwrap();
        // 2 x-edges with hy/hx = 0.5, 2 y-edges with hx/hy = 2.
        assert!((sys.k_nu().to_dense()[[0, 0]] - 3.0 * (2.0 * 0.5 + 2.0 * 2.0)).abs() < 1e-14);
    }

    #[test]
    fn coil_touching_core_is_rejected() {
        let mut grid = Grid2D::uniform(4, 4, 1.0, 1.0).unwrap();
        grid.paint(CellRect::new(1, 1, 2, 2), Region::Core).unwrap();
        grid.paint(CellRect::new(2, 1, 3, 2), Region::CoilPlus).unwrap();
        assert!(matches!(
            assemble(&grid, &Materials::default()),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn partition_reads_off_blocks() {
        let p = partition(&two_dof()).unwrap();
        assert_eq!(p.mbar(), &[1.0]);
        assert_eq!(p.k11().to_dense()[[0, 0]], 2.0);
        assert_eq!(p.k12().to_dense()[[0, 0]], -1.0);
        assert_eq!(p.k22().to_dense()[[0, 0]], 2.0);
        assert_eq!(p.xbar(), &[1.0]);
    }

    #[test]
    fn partition_errors() {
        let no_c =
            SemiDiscreteSystem::new(vec![0.0, 0.0], from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]), vec![0.0; 2]).unwrap();
        assert_eq!(partition(&no_c).unwrap_err(), Error::NoConductingRegion);
        let no_nc =
            SemiDiscreteSystem::new(vec![1.0, 1.0], from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]), vec![0.0; 2]).unwrap();
        assert_eq!(partition(&no_nc).unwrap_err(), Error::NoAlgebraicBlock);
    }

    #[test]
    fn permuted_dofs_give_identical_blocks() {
        // Same system as two_dof() with the unknowns swapped.
        let sys = SemiDiscreteSystem::new(
            vec![0.0, 1.0],
            from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]),
            vec![1.0, 0.0],
        )
        .unwrap();
        let p = partition(&sys).unwrap();
        let q = partition(&two_dof()).unwrap();
        assert_eq!(p.idx_c(), &[1]);
        assert_eq!(p.mbar(), q.mbar());
        assert_eq!(p.k11().to_dense(), q.k11().to_dense());
        assert_eq!(p.k12().to_dense(), q.k12().to_dense());
        assert_eq!(p.k22().to_dense(), q.k22().to_dense());
        assert_eq!(p.xbar(), q.xbar());
    }

    #[test]
    fn schur_hand_example() {
        let r = reduce_schur(partition(&two_dof()).unwrap()).unwrap();
        let mut s = [0.0];
        r.apply_schur(&[1.0], &mut s);
        assert!((s[0] - 1.5).abs() < 1e-15);
        assert!((r.ybar()[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_blocks() {
        let p = PartitionedSystem::from_blocks(
            vec![2.0],
            from_dense(1, 1, &[3.0]),
            from_dense(1, 1, &[0.0]),
            from_dense(1, 1, &[5.0]),
            vec![7.0],
        )
        .unwrap();
        let r = reduce_schur(p).unwrap();
        let mut s = [0.0];
        r.apply_schur(&[1.0], &mut s);
        assert_eq!(s[0], 3.0);
        assert_eq!(r.ybar(), &[0.0]);
    }

    #[test]
    fn singular_k22_is_a_regularity_error() {
        let p = PartitionedSystem::from_blocks(
            vec![1.0],
            from_dense(1, 1, &[2.0]),
            from_dense(1, 1, &[-1.0]),
            from_dense(1, 1, &[0.0]),
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(reduce_schur(p), Err(Error::SingularStiffnessBlock(_))));
    }

    #[test]
    fn reconstruction_hand_examples() {
        let r = reduce_schur(partition(&two_dof()).unwrap()).unwrap();
        assert!((r.reconstruct_nc(&[1.0], 0.0).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((r.reconstruct_nc(&[1.0], 2.0).unwrap()[0] - 1.5).abs() < 1e-15);
        assert_eq!(r.reconstruct_nc(&[0.0], 0.0).unwrap(), vec![0.0]);
        assert!(matches!(r.reconstruct_nc(&[1.0, 2.0], 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn reduced_rhs_matches_eliminated_dae() {
        // a_c' = -2 a_c + a_nc with a_nc = (a_c + i)/2  =>  a_c' = -1.5 a_c + 0.5 i
        let r = reduce_schur(partition(&two_dof()).unwrap()).unwrap();
        let mut out = [0.0];
        r.reduced_rhs(&[2.0], 4.0, &mut out);
        assert!((out[0] - (-3.0 + 2.0)).abs() < 1e-15);
    }
}
