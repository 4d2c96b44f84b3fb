//! Finite-dimensional C*-algebras `⊕ᵢ M_{nᵢ}(ℂ)`.
//!
//! Elements are handled either block by block ([`AlgebraElement`]) or as
//! coordinate vectors in the matrix-unit basis. The basis is ordered block by
//! block and row-major inside a block, so unit `(i; k, l)` sits at index
//! `offset(i) + k * nᵢ + l`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{c, herm_eig, identity, kron, operator_norm_unchecked, CMatrix, CVector, MatrixWire, Tolerance};
use crate::random::{haar_unitary, index, Rng64};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AlgebraShape {
    blocks: Vec<usize>,
}

/// Matrix unit `E_{row,col}` of block `block`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unit {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl TryFrom<Vec<usize>> for AlgebraShape {
    type Error = Error;
    fn try_from(blocks: Vec<usize>) -> Result<Self> {
        AlgebraShape::new(blocks)
    }
}

impl From<AlgebraShape> for Vec<usize> {
    fn from(s: AlgebraShape) -> Vec<usize> {
        s.blocks
    }
}

impl AlgebraShape {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::InvalidConfig(format!("invalid algebra shape {blocks:?}")));
        }
        Ok(AlgebraShape { blocks })
    }

    /// The one-dimensional algebra ℂ.
    pub fn scalars() -> Self {
        AlgebraShape { blocks: vec![1] }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Vector-space dimension `Σ nᵢ²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|n| n * n).sum()
    }

    pub fn index(&self, block: usize, row: usize, col: usize) -> usize {
        self.offset(block) + row * self.blocks[block] + col
    }

    pub fn units(&self) -> Vec<Unit> {
        let mut out = Vec::with_capacity(self.dim());
        for (block, &n) in self.blocks.iter().enumerate() {
            for row in 0..n {
                for col in 0..n {
                    out.push(Unit { block, row, col });
                }
            }
        }
        out
    }

    pub fn unit(&self, idx: usize) -> Unit {
        let mut rest = idx;
        for (block, &n) in self.blocks.iter().enumerate() {
            if rest < n * n {
                return Unit { block, row: rest / n, col: rest % n };
            }
            rest -= n * n;
        }
        panic!("unit index {idx} out of range for shape {:?}", self.blocks);
    }

    /// Index of `E_k*`.
    pub fn star_index(&self, k: usize) -> usize {
        let u = self.unit(k);
        self.index(u.block, u.col, u.row)
    }

    /// Index of `E_k E_m`, or `None` when the product vanishes.
    pub fn unit_product(&self, k: usize, m: usize) -> Option<usize> {
        let a = self.unit(k);
        let b = self.unit(m);
        (a.block == b.block && a.col == b.row).then(|| self.index(a.block, a.row, b.col))
    }

    /// Indices of the diagonal units `E_{(i;k,k)}`.
    pub fn diagonal_units(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (block, &n) in self.blocks.iter().enumerate() {
            for k in 0..n {
                out.push(self.index(block, k, k));
            }
        }
        out
    }

    pub fn basis_vector(&self, k: usize) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[k] = c(1.0, 0.0);
        v
    }

    pub fn unit_coords(&self) -> CVector {
        let mut v = CVector::zeros(self.dim());
        for k in self.diagonal_units() {
            v[k] = c(1.0, 0.0);
        }
        v
    }

    pub fn to_blocks(&self, a: &CVector) -> Vec<CMatrix> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let o = self.offset(i);
                CMatrix::from_fn(n, n, |r, s| a[o + r * n + s])
            })
            .collect()
    }

    pub fn from_blocks(&self, blocks: &[CMatrix]) -> CVector {
        let mut v = CVector::zeros(self.dim());
        for (i, (&n, b)) in self.blocks.iter().zip(blocks).enumerate() {
            let o = self.offset(i);
            for r in 0..n {
                for s in 0..n {
                    v[o + r * n + s] = b[(r, s)];
                }
            }
        }
        v
    }

    pub fn product(&self, a: &CVector, b: &CVector) -> CVector {
        let ab: Vec<CMatrix> = self.to_blocks(a).iter().zip(self.to_blocks(b)).map(|(x, y)| x * y).collect();
        self.from_blocks(&ab)
    }

    pub fn star(&self, a: &CVector) -> CVector {
        let blocks: Vec<CMatrix> = self.to_blocks(a).iter().map(|x| x.adjoint()).collect();
        self.from_blocks(&blocks)
    }

    /// C*-norm: largest block operator norm.
    pub fn norm(&self, a: &CVector) -> f64 {
        self.to_blocks(a).iter().map(operator_norm_unchecked).fold(0.0, f64::max)
    }

    /// Faithful trace `τ(a) = Σᵢ tr(aᵢ)`.
    pub fn trace(&self, a: &CVector) -> num_complex::Complex64 {
        self.diagonal_units().into_iter().map(|k| a[k]).sum()
    }

    /// Matrix of `x ↦ a x` on coordinates.
    pub fn left_mult_matrix(&self, a: &CVector) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (i, blk) in self.to_blocks(a).iter().enumerate() {
            let n = self.blocks[i];
            let o = self.offset(i);
            out.view_mut((o, o), (n * n, n * n)).copy_from(&kron(blk, &identity(n)));
        }
        out
    }

    /// Matrix of `x ↦ x a` on coordinates.
    pub fn right_mult_matrix(&self, a: &CVector) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (i, blk) in self.to_blocks(a).iter().enumerate() {
            let n = self.blocks[i];
            let o = self.offset(i);
            out.view_mut((o, o), (n * n, n * n)).copy_from(&kron(&identity(n), &blk.transpose()));
        }
        out
    }
}

/// A block-diagonal element of `⊕ᵢ M_{nᵢ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementWire", into = "ElementWire")]
pub struct AlgebraElement {
    shape: AlgebraShape,
    blocks: Vec<CMatrix>,
}

#[derive(Clone, Serialize, Deserialize)]
struct ElementWire {
    shape: AlgebraShape,
    blocks: Vec<MatrixWire>,
}

impl From<AlgebraElement> for ElementWire {
    fn from(a: AlgebraElement) -> Self {
        ElementWire { shape: a.shape, blocks: a.blocks.iter().map(MatrixWire::from).collect() }
    }
}

impl TryFrom<ElementWire> for AlgebraElement {
    type Error = Error;
    fn try_from(w: ElementWire) -> Result<Self> {
        let blocks = w.blocks.into_iter().map(CMatrix::try_from).collect::<Result<Vec<_>>>()?;
        AlgebraElement::new(w.shape, blocks)
    }
}

/// Result of [`AlgebraElement::is_positive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Positivity {
    pub positive: bool,
    pub min_eigenvalue: f64,
}

impl AlgebraElement {
    pub fn new(shape: AlgebraShape, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != shape.num_blocks() || blocks.iter().zip(shape.blocks()).any(|(b, &n)| b.nrows() != n || b.ncols() != n) {
            return Err(Error::ShapeMismatch(format!("blocks do not match shape {:?}", shape.blocks())));
        }
        if !blocks.iter().all(crate::numkernel::is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(AlgebraElement { shape, blocks })
    }

    pub fn from_coords(shape: &AlgebraShape, v: &CVector) -> Self {
        AlgebraElement { blocks: shape.to_blocks(v), shape: shape.clone() }
    }

    pub fn unit(shape: &AlgebraShape) -> Self {
        AlgebraElement::from_coords(shape, &shape.unit_coords())
    }

    pub fn matrix_unit(shape: &AlgebraShape, block: usize, row: usize, col: usize) -> Self {
        AlgebraElement::from_coords(shape, &shape.basis_vector(shape.index(block, row, col)))
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn coords(&self) -> CVector {
        self.shape.from_blocks(&self.blocks)
    }

    fn same_shape(&self, other: &AlgebraElement) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape.blocks(), other.shape.blocks())))
        }
    }

    pub fn mul(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.same_shape(other)?;
        Ok(AlgebraElement { shape: self.shape.clone(), blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect() })
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.same_shape(other)?;
        Ok(AlgebraElement { shape: self.shape.clone(), blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect() })
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.same_shape(other)?;
        Ok(AlgebraElement { shape: self.shape.clone(), blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect() })
    }

    pub fn adjoint(&self) -> AlgebraElement {
        AlgebraElement { shape: self.shape.clone(), blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(operator_norm_unchecked).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> num_complex::Complex64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Hermitian with spectrum above `−ctol·(1+‖a‖)` in every block.
    pub fn is_positive(&self, tol: &Tolerance) -> Positivity {
        let norm = self.norm();
        let mut min_eigenvalue = f64::INFINITY;
        let mut positive = true;
        for b in &self.blocks {
            let skew = operator_norm_unchecked(&(b - b.adjoint()));
            if skew > tol.ctol {
                positive = false;
            }
            let h = (b + b.adjoint()) * c(0.5, 0.0);
            let lam = h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, v| m.min(*v));
            min_eigenvalue = min_eigenvalue.min(lam);
        }
        if min_eigenvalue < -tol.threshold(norm) {
            positive = false;
        }
        Positivity { positive, min_eigenvalue }
    }
}

/// Product, adjoint of `a`, and norm of `a` in one call.
pub fn algebra_ops(a: &AlgebraElement, b: &AlgebraElement) -> Result<(AlgebraElement, AlgebraElement, f64)> {
    Ok((a.mul(b)?, a.adjoint(), a.norm()))
}

/// Complex-linear map between algebras, stored as the coordinate matrix whose
/// k-th column holds the image of the k-th matrix unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarMap {
    pub domain: AlgebraShape,
    pub codomain: AlgebraShape,
    #[serde(with = "crate::numkernel::matrix_serde")]
    pub matrix: CMatrix,
}

/// Residuals of the unital *-homomorphism conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarMapReport {
    pub multiplicativity: f64,
    pub star_preservation: f64,
    pub unitality: f64,
}

impl StarMapReport {
    pub fn max(&self) -> f64 {
        self.multiplicativity.max(self.star_preservation).max(self.unitality)
    }

    pub fn passes(&self, tol: &Tolerance) -> bool {
        self.max() <= tol.ctol
    }
}

impl StarMap {
    pub fn new(domain: AlgebraShape, codomain: AlgebraShape, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "map matrix {}x{} for {:?} -> {:?}",
                matrix.nrows(),
                matrix.ncols(),
                domain.blocks(),
                codomain.blocks()
            )));
        }
        if !crate::numkernel::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        Ok(StarMap { domain, codomain, matrix })
    }

    pub fn identity(shape: &AlgebraShape) -> Self {
        StarMap { domain: shape.clone(), codomain: shape.clone(), matrix: identity(shape.dim()) }
    }

    /// Builds the map from images of the matrix units.
    pub fn from_images(domain: &AlgebraShape, codomain: &AlgebraShape, images: &[AlgebraElement]) -> Result<Self> {
        if images.len() != domain.dim() || images.iter().any(|a| a.shape() != codomain) {
            return Err(Error::ShapeMismatch("images do not match the declared shapes".into()));
        }
        let mut m = CMatrix::zeros(codomain.dim(), domain.dim());
        for (k, img) in images.iter().enumerate() {
            m.set_column(k, &img.coords());
        }
        StarMap::new(domain.clone(), codomain.clone(), m)
    }

    pub fn apply(&self, a: &CVector) -> CVector {
        &self.matrix * a
    }

    pub fn apply_element(&self, a: &AlgebraElement) -> Result<AlgebraElement> {
        if a.shape() != &self.domain {
            return Err(Error::ShapeMismatch("argument outside the domain".into()));
        }
        Ok(AlgebraElement::from_coords(&self.codomain, &self.apply(&a.coords())))
    }

    pub fn image(&self, k: usize) -> AlgebraElement {
        AlgebraElement::from_coords(&self.codomain, &self.matrix.column(k).into_owned())
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &StarMap) -> Result<StarMap> {
        if first.codomain != self.domain {
            return Err(Error::ShapeMismatch("maps are not composable".into()));
        }
        Ok(StarMap { domain: first.domain.clone(), codomain: self.codomain.clone(), matrix: &self.matrix * &first.matrix })
    }

    /// Largest image-norm difference over the matrix units.
    pub fn distance(&self, other: &StarMap) -> f64 {
        if self.domain != other.domain || self.codomain != other.codomain {
            return f64::INFINITY;
        }
        let diff = &self.matrix - &other.matrix;
        (0..self.domain.dim()).map(|k| self.codomain.norm(&diff.column(k).into_owned())).fold(0.0, f64::max)
    }
}

pub fn check_star_map(rho: &StarMap) -> StarMapReport {
    let dom = &rho.domain;
    let cod = &rho.codomain;
    let d = dom.dim();
    let images: Vec<CVector> = (0..d).map(|k| rho.matrix.column(k).into_owned()).collect();
    let mut mult = 0.0_f64;
    for k in 0..d {
        for m in 0..d {
            let lhs = match dom.unit_product(k, m) {
                Some(j) => images[j].clone(),
                None => CVector::zeros(cod.dim()),
            };
            let rhs = cod.product(&images[k], &images[m]);
            mult = mult.max(cod.norm(&(lhs - rhs)));
        }
    }
    let mut star = 0.0_f64;
    for k in 0..d {
        let lhs = &images[dom.star_index(k)];
        let rhs = cod.star(&images[k]);
        star = star.max(cod.norm(&(lhs - rhs)));
    }
    let unit = rho.apply(&dom.unit_coords()) - cod.unit_coords();
    StarMapReport { multiplicativity: mult, star_preservation: star, unitality: cod.norm(&unit) }
}

/// A *-automorphism together with its inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Automorphism {
    pub map: StarMap,
    pub inverse: StarMap,
}

impl Automorphism {
    pub fn identity(shape: &AlgebraShape) -> Self {
        Automorphism { map: StarMap::identity(shape), inverse: StarMap::identity(shape) }
    }

    pub fn new(map: StarMap, inverse: StarMap, tol: &Tolerance) -> Result<Self> {
        if map.domain != map.codomain || inverse.domain != map.domain || inverse.codomain != map.domain {
            return Err(Error::ShapeMismatch("automorphism must be an endomorphism".into()));
        }
        let a = Automorphism { map, inverse };
        let r = a.inverse_residual();
        if r > tol.ctol {
            return Err(Error::Validation(format!("automorphism inverse residual {r:e}")));
        }
        Ok(a)
    }

    /// `α(a)_{σ(i)} = uᵢ aᵢ uᵢ*` for a size-preserving block permutation σ.
    pub fn from_parts(shape: &AlgebraShape, perm: &[usize], unitaries: &[CMatrix]) -> Result<Self> {
        let k = shape.num_blocks();
        let mut seen = vec![false; k];
        if perm.len() != k || unitaries.len() != k {
            return Err(Error::ShapeMismatch("permutation/unitary count".into()));
        }
        for (i, &p) in perm.iter().enumerate() {
            if p >= k || seen[p] || shape.blocks()[p] != shape.blocks()[i] {
                return Err(Error::InvalidConfig(format!("invalid block permutation {perm:?}")));
            }
            seen[p] = true;
            if unitaries[i].nrows() != shape.blocks()[i] || unitaries[i].ncols() != shape.blocks()[i] {
                return Err(Error::ShapeMismatch("unitary size".into()));
            }
        }
        let mut inv_perm = vec![0; k];
        for (i, &p) in perm.iter().enumerate() {
            inv_perm[p] = i;
        }
        let inv_unitaries: Vec<CMatrix> = (0..k).map(|j| unitaries[inv_perm[j]].adjoint()).collect();
        Ok(Automorphism { map: conjugation_map(shape, perm, unitaries), inverse: conjugation_map(shape, &inv_perm, &inv_unitaries) })
    }

    /// Inner automorphism `Ad u` for a unitary element `u`.
    pub fn inner(u: &AlgebraElement) -> Result<Self> {
        let shape = u.shape().clone();
        let perm: Vec<usize> = (0..shape.num_blocks()).collect();
        Automorphism::from_parts(&shape, &perm, u.blocks())
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.map.domain
    }

    pub fn apply(&self, a: &CVector) -> CVector {
        self.map.apply(a)
    }

    pub fn apply_inverse(&self, a: &CVector) -> CVector {
        self.inverse.apply(a)
    }

    pub fn inverted(&self) -> Automorphism {
        Automorphism { map: self.inverse.clone(), inverse: self.map.clone() }
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &Automorphism) -> Result<Automorphism> {
        Ok(Automorphism { map: self.map.after(&first.map)?, inverse: first.inverse.after(&self.inverse)? })
    }

    /// `max(‖α∘α⁻¹ − id‖, ‖α⁻¹∘α − id‖)` on coordinate matrices.
    pub fn inverse_residual(&self) -> f64 {
        let id = identity(self.shape().dim());
        let a = operator_norm_unchecked(&(&self.map.matrix * &self.inverse.matrix - &id));
        let b = operator_norm_unchecked(&(&self.inverse.matrix * &self.map.matrix - &id));
        a.max(b)
    }

    pub fn distance(&self, other: &Automorphism) -> f64 {
        self.map.distance(&other.map)
    }
}

fn conjugation_map(shape: &AlgebraShape, perm: &[usize], unitaries: &[CMatrix]) -> StarMap {
    let d = shape.dim();
    let mut m = CMatrix::zeros(d, d);
    for (i, &n) in shape.blocks().iter().enumerate() {
        let u = &unitaries[i];
        let target = shape.offset(perm[i]);
        for k in 0..n {
            for l in 0..n {
                let col = shape.index(i, k, l);
                for r in 0..n {
                    for s in 0..n {
                        m[(target + r * n + s, col)] = u[(r, k)] * u[(s, l)].conj();
                    }
                }
            }
        }
    }
    StarMap { domain: shape.clone(), codomain: shape.clone(), matrix: m }
}

/// Random block permutation (within equal sizes) composed with Haar conjugations.
pub fn random_automorphism(shape: &AlgebraShape, rng: &mut Rng64) -> Automorphism {
    let k = shape.num_blocks();
    let mut perm: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        let j = index(rng, i + 1);
        if shape.blocks()[i] == shape.blocks()[j] {
            perm.swap(i, j);
        }
    }
    let unitaries: Vec<CMatrix> = shape.blocks().iter().map(|&n| haar_unitary(rng, n)).collect();
    Automorphism::from_parts(shape, &perm, &unitaries).expect("permutation preserves block sizes")
}

/// All nonnegative integer vectors `c` with `Σ c_j sizes_j = target`.
fn multiplicity_solutions(sizes: &[usize], target: usize) -> Vec<Vec<usize>> {
    fn rec(sizes: &[usize], target: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == sizes.len() {
            if target == 0 {
                out.push(acc.clone());
            }
            return;
        }
        let n = sizes[acc.len()];
        for m in 0..=target / n {
            acc.push(m);
            rec(sizes, target - m * n, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(sizes, target, &mut Vec::new(), &mut out);
    out
}

/// Unital *-homomorphism `b ↦ (W_l (⊕_j b_j^{⊕ mult[l][j]}) W_l*)_l`.
pub fn star_hom_from_multiplicities(
    domain: &AlgebraShape,
    codomain: &AlgebraShape,
    mult: &[Vec<usize>],
    unitaries: &[CMatrix],
) -> Result<StarMap> {
    let nb = domain.blocks();
    if mult.len() != codomain.num_blocks() || unitaries.len() != codomain.num_blocks() {
        return Err(Error::ShapeMismatch("multiplicity table size".into()));
    }
    for (l, row) in mult.iter().enumerate() {
        let total: usize = row.iter().zip(nb).map(|(m, n)| m * n).sum();
        if row.len() != nb.len() || total != codomain.blocks()[l] {
            return Err(Error::InvalidConfig(format!("multiplicities {row:?} do not fill block of size {}", codomain.blocks()[l])));
        }
    }
    let mut m = CMatrix::zeros(codomain.dim(), domain.dim());
    for (k, unit) in domain.units().into_iter().enumerate() {
        let mut blocks = Vec::with_capacity(codomain.num_blocks());
        for (l, &p) in codomain.blocks().iter().enumerate() {
            let mut e = CMatrix::zeros(p, p);
            let mut off = 0;
            for (j, &n) in nb.iter().enumerate() {
                for _ in 0..mult[l][j] {
                    if j == unit.block {
                        e[(off + unit.row, off + unit.col)] = c(1.0, 0.0);
                    }
                    off += n;
                }
            }
            blocks.push(&unitaries[l] * e * unitaries[l].adjoint());
        }
        m.set_column(k, &codomain.from_blocks(&blocks));
    }
    StarMap::new(domain.clone(), codomain.clone(), m)
}

/// Random unital *-homomorphism between fixed shapes.
pub fn random_unital_hom(domain: &AlgebraShape, codomain: &AlgebraShape, rng: &mut Rng64) -> Result<StarMap> {
    let mut mult = Vec::new();
    for &p in codomain.blocks() {
        let sols = multiplicity_solutions(domain.blocks(), p);
        if sols.is_empty() {
            return Err(Error::InvalidConfig(format!("no unital embedding of {:?} into a block of size {p}", domain.blocks())));
        }
        mult.push(sols[index(rng, sols.len())].clone());
    }
    let unitaries: Vec<CMatrix> = codomain.blocks().iter().map(|&p| haar_unitary(rng, p)).collect();
    star_hom_from_multiplicities(domain, codomain, &mult, &unitaries)
}

/// Random codomain shape with at most `max_blocks` blocks of size at most
/// `max_block`, together with a random unital *-homomorphism into it.
pub fn random_hom_and_codomain(
    domain: &AlgebraShape,
    max_block: usize,
    max_blocks: usize,
    rng: &mut Rng64,
) -> Result<(AlgebraShape, StarMap)> {
    let nb = domain.blocks();
    let min_size = *nb.iter().min().expect("shape is nonempty");
    if min_size > max_block {
        return Err(Error::InvalidConfig("block cap below domain block size".into()));
    }
    let count = 1 + index(rng, max_blocks.max(1));
    let mut mult = Vec::new();
    let mut sizes = Vec::new();
    for _ in 0..count {
        loop {
            let row: Vec<usize> = nb.iter().map(|&n| index(rng, max_block / n + 1)).collect();
            let size: usize = row.iter().zip(nb).map(|(m, n)| m * n).sum();
            if size >= 1 && size <= max_block {
                sizes.push(size);
                mult.push(row);
                break;
            }
        }
    }
    let codomain = AlgebraShape::new(sizes)?;
    let unitaries: Vec<CMatrix> = codomain.blocks().iter().map(|&p| haar_unitary(rng, p)).collect();
    let rho = star_hom_from_multiplicities(domain, &codomain, &mult, &unitaries)?;
    Ok((codomain, rho))
}

/// Smallest eigenvalue of the Hermitian part of each block.
pub fn min_block_eigenvalue(a: &AlgebraElement, tol: &Tolerance) -> Result<f64> {
    let mut m = f64::INFINITY;
    for b in a.blocks() {
        let e = herm_eig(b, tol)?;
        m = m.min(e.values.first().copied().unwrap_or(f64::INFINITY));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, rng_from_seed};
    use proptest::prelude::*;

    fn shape(b: &[usize]) -> AlgebraShape {
        AlgebraShape::new(b.to_vec()).unwrap()
    }

    fn random_element(s: &AlgebraShape, rng: &mut Rng64) -> AlgebraElement {
        let blocks = s.blocks().iter().map(|&n| gaussian_matrix(rng, n, n)).collect();
        AlgebraElement::new(s.clone(), blocks).unwrap()
    }

    #[test]
    fn unit_is_multiplicative_identity() {
        let s = shape(&[2, 3]);
        let b = random_element(&s, &mut rng_from_seed(1));
        let (p, _, _) = algebra_ops(&AlgebraElement::unit(&s), &b).unwrap();
        assert_eq!(p, b);
    }

    #[test]
    fn matrix_unit_adjoint_and_norm() {
        let s = shape(&[2]);
        let e12 = AlgebraElement::matrix_unit(&s, 0, 0, 1);
        let e21 = AlgebraElement::matrix_unit(&s, 0, 1, 0);
        let (_, adj, norm) = algebra_ops(&e12, &e12).unwrap();
        assert_eq!(adj, e21);
        assert!((norm - 1.0).abs() < 1e-15);
        assert_eq!(e12.adjoint().adjoint(), e12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = AlgebraElement::unit(&shape(&[2]));
        let b = AlgebraElement::unit(&shape(&[1, 1]));
        assert!(matches!(a.mul(&b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn c_star_identity_on_samples() {
        let mut rng = rng_from_seed(2);
        for b in [vec![1], vec![2], vec![3], vec![2, 2], vec![1, 2]] {
            let s = shape(&b);
            for _ in 0..20 {
                let a = random_element(&s, &mut rng);
                let n = a.norm();
                let lhs = a.adjoint().mul(&a).unwrap().norm();
                assert!((lhs - n * n).abs() <= 1e-10 * (1.0 + n * n));
            }
        }
    }

    #[test]
    fn positivity_examples() {
        let tol = Tolerance::default();
        let s = shape(&[2]);
        assert!(AlgebraElement::unit(&s).is_positive(&tol).positive);
        let d = AlgebraElement::new(s.clone(), vec![CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]))]).unwrap();
        let p = d.is_positive(&tol);
        assert!(!p.positive);
        assert!((p.min_eigenvalue + 1.0).abs() < 1e-14);
        let mut rng = rng_from_seed(3);
        let s2 = shape(&[1, 2]);
        for _ in 0..100 {
            let x = random_element(&s2, &mut rng);
            assert!(x.adjoint().mul(&x).unwrap().is_positive(&tol).positive);
        }
    }

    #[test]
    fn trace_examples_and_cyclicity() {
        let s = shape(&[2, 3]);
        assert_eq!(AlgebraElement::unit(&s).trace(), c(5.0, 0.0));
        assert_eq!(AlgebraElement::matrix_unit(&shape(&[2]), 0, 0, 1).trace(), c(0.0, 0.0));
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let a = random_element(&s, &mut rng);
            let b = random_element(&s, &mut rng);
            let lhs = a.mul(&b).unwrap().trace();
            let rhs = b.mul(&a).unwrap().trace();
            assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + a.norm() * b.norm()));
        }
    }

    #[test]
    fn trace_is_nondegenerate_on_samples() {
        // τ(c b) over all basis b recovers every coordinate of c.
        let s = shape(&[1, 2]);
        let mut rng = rng_from_seed(5);
        let cel = random_element(&s, &mut rng).coords();
        let pairings: Vec<_> = (0..s.dim()).map(|k| s.trace(&s.product(&cel, &s.basis_vector(k)))).collect();
        assert!(pairings.iter().any(|z| z.norm() > 1e-3));
        let zero = CVector::zeros(s.dim());
        assert!((0..s.dim()).all(|k| s.trace(&s.product(&zero, &s.basis_vector(k))).norm() == 0.0));
    }

    #[test]
    fn identity_map_has_zero_residuals() {
        let r = check_star_map(&StarMap::identity(&shape(&[2, 1])));
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn transpose_is_not_multiplicative() {
        let s = shape(&[2]);
        let images: Vec<AlgebraElement> = s.units().iter().map(|u| AlgebraElement::matrix_unit(&s, 0, u.col, u.row)).collect();
        let rho = StarMap::from_images(&s, &s, &images).unwrap();
        let r = check_star_map(&rho);
        // Images of E12 and E21 multiply to E22 while E12 E21 = E11 maps to E11.
        assert!(r.multiplicativity >= 1.0);
        assert!(r.star_preservation < 1e-15);
    }

    #[test]
    fn diagonal_embedding_passes() {
        let d = shape(&[2]);
        let cod = shape(&[2, 2]);
        let rho = star_hom_from_multiplicities(&d, &cod, &[vec![1], vec![1]], &[identity(2), identity(2)]).unwrap();
        let r = check_star_map(&rho);
        assert!(r.passes(&Tolerance::default()));
        assert_eq!(r.unitality, 0.0);
    }

    #[test]
    fn random_automorphism_is_a_star_automorphism() {
        let tol = Tolerance::default();
        for (seed, b) in [vec![2], vec![2, 2], vec![1, 2, 1], vec![3]].into_iter().enumerate() {
            let s = shape(&b);
            let mut rng = rng_from_seed(seed as u64);
            let a = random_automorphism(&s, &mut rng);
            assert!(check_star_map(&a.map).passes(&tol));
            assert!(check_star_map(&a.inverse).passes(&tol));
            assert!(a.inverse_residual() < tol.ctol);
            let x = random_element(&s, &mut rng);
            let ax = a.map.apply_element(&x).unwrap();
            assert!((ax.norm() - x.norm()).abs() < 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn block_swap_is_an_involution() {
        let s = shape(&[2, 2]);
        let swap = Automorphism::from_parts(&s, &[1, 0], &[identity(2), identity(2)]).unwrap();
        let sq = swap.after(&swap).unwrap();
        assert_eq!(sq.map.matrix, identity(8));
    }

    #[test]
    fn scalar_algebra_automorphism_is_identity() {
        let s = shape(&[1]);
        let a = random_automorphism(&s, &mut rng_from_seed(9));
        assert!((a.map.matrix[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_homs_are_unital_star_homs() {
        let tol = Tolerance::default();
        let mut rng = rng_from_seed(10);
        let b = shape(&[2]);
        let cc = shape(&[2, 2]);
        let d = shape(&[4]);
        let r1 = random_unital_hom(&b, &cc, &mut rng).unwrap();
        let r2 = random_unital_hom(&cc, &d, &mut rng).unwrap();
        assert!(check_star_map(&r1).passes(&tol));
        assert!(check_star_map(&r2.after(&r1).unwrap()).passes(&tol));
        assert!(random_unital_hom(&shape(&[2]), &shape(&[3]), &mut rng).is_err());
        for _ in 0..20 {
            let (_, rho) = random_hom_and_codomain(&shape(&[1, 2]), 4, 2, &mut rng).unwrap();
            assert!(check_star_map(&rho).passes(&tol));
        }
    }

    #[test]
    fn element_json_round_trip() {
        let s = shape(&[1, 2]);
        let a = random_element(&s, &mut rng_from_seed(11));
        let txt = serde_json::to_string(&a).unwrap();
        let back: AlgebraElement = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<AlgebraShape>("[]").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_positive_cone_closed_under_sums(seed in any::<u64>()) {
            let tol = Tolerance::default();
            let s = shape(&[1, 2]);
            let mut rng = rng_from_seed(seed);
            let x = random_element(&s, &mut rng);
            let y = random_element(&s, &mut rng);
            let p = x.adjoint().mul(&x).unwrap().add(&y.adjoint().mul(&y).unwrap()).unwrap();
            prop_assert!(p.is_positive(&tol).positive);
        }

        #[test]
        fn prop_automorphisms_are_isometric(seed in any::<u64>()) {
            let s = shape(&[2, 2, 1]);
            let mut rng = rng_from_seed(seed);
            let a = random_automorphism(&s, &mut rng);
            let x = random_element(&s, &mut rng);
            let ax = a.map.apply_element(&x).unwrap();
            prop_assert!((ax.norm() - x.norm()).abs() <= 1e-10 * (1.0 + x.norm()));
        }
    }
}
