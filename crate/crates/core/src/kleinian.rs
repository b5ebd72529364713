//! Free products `G = Q₁ ∗ … ∗ Q_n ∗ Γ₀` of quasi-Fuchsian groups and a Schottky group.
//!
//! The invariant component of `Ω(G)` uniformizes a surface `S_{n+1}` of genus
//! `p_{n+1} = p₀ + p₁ + … + p_n`. Its Green's function is computed over the free
//! subgroup `G₀ = Γ₀ ∗ Q₁₀ ∗ … ∗ Q_{n0}`, each `Q_{i0}` generated by the first
//! `p_i` generators of `Q_i`, and every `G₀` word is carried to a word of the
//! associated Schottky group `Γ` by a letter dictionary. The decomposition is
//! input: factors are supplied, and only checkable facts are validated.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::freegroup::{ball, conjugacy_reps, free_product_enumerate, Alphabet, Letter, Word};
use crate::fuchsian::{green_s0, FuchsianSpec, Side};
use crate::green::{condition_number, log_cr, GreenResult, MAX_CONDITION, ORBIT_COLLISION_EPS};
use crate::moebius::{MapClass, MoebiusMap, SpherePoint};
use crate::periods::tau_matrix;
use crate::schottky::{discs_disjoint, Circle, SchottkyGroup, MARKING_TOL};
use crate::series::{sum_over_words, tail_estimate, Graded};

/// Fundamental-domain data of one factor: `F = D \ ∪ sides`, `F' = D' \ ∪ sides`,
/// with `D'` the complement of the disc `D`.
#[derive(Debug, Clone)]
pub struct FactorDomain {
    pub disc: Circle,
    pub sides: Vec<Circle>,
}

impl FactorDomain {
    fn outside_sides(&self, z: SpherePoint) -> bool {
        self.sides.iter().all(|s| s.rel_depth(z) <= MARKING_TOL)
    }

    /// Membership in the closed region `F ⊂ D`.
    pub fn f_contains(&self, z: SpherePoint) -> bool {
        self.disc.rel_depth(z) >= -MARKING_TOL && self.outside_sides(z)
    }

    /// Membership in the closed region `F' ⊂ D'`.
    pub fn f_prime_contains(&self, z: SpherePoint) -> bool {
        self.disc.rel_depth(z) <= MARKING_TOL && self.outside_sides(z)
    }
}

/// One quasi-Fuchsian factor with its own Schottky partner.
#[derive(Debug, Clone)]
pub struct Factor {
    pub group: FuchsianSpec,
    pub domain: Option<FactorDomain>,
}

impl Factor {
    pub fn genus(&self) -> usize {
        self.group.genus()
    }
}

/// Input for [`KleinianSpec::new`]: raw generators are checked for parabolics first.
#[derive(Debug, Clone)]
pub struct FactorInput {
    pub generators: Vec<MoebiusMap>,
    pub schottky: SchottkyGroup,
    pub domain: Option<FactorDomain>,
}

/// A validated free-product model with its associated Schottky group.
#[derive(Debug, Clone)]
pub struct KleinianSpec {
    factors: Vec<Factor>,
    gamma0: Option<SchottkyGroup>,
    gamma: SchottkyGroup,
    dictionary: Vec<usize>,
}

/// `p₀ + Σ p_i`.
pub fn expected_rank(p0: usize, factor_genera: &[usize]) -> usize {
    p0 + factor_genera.iter().sum::<usize>()
}

fn reject_parabolic(g: &MoebiusMap, name: &str) -> Result<()> {
    match g.classify() {
        MapClass::Parabolic => Err(Error::ParabolicGenerator(name.to_string())),
        MapClass::Loxodromic => Ok(()),
        other => Err(Error::NotLoxodromic(format!("{name} is {other}"))),
    }
}

impl KleinianSpec {
    /// Validates the factors, the rank arithmetic and the dictionary, which
    /// sends flattened `G₀` generator `k` (Γ₀ first, then each `Q_{i0}`) to
    /// generator `dictionary[k]` of `Γ`; `None` means the identity.
    pub fn new(
        factors: Vec<FactorInput>,
        gamma0: Option<SchottkyGroup>,
        gamma: SchottkyGroup,
        dictionary: Option<Vec<usize>>,
    ) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            for (j, g) in f.generators.iter().enumerate() {
                reject_parabolic(g, &format!("q{}.{}", i + 1, j + 1))?;
            }
        }
        if let Some(g0) = &gamma0 {
            for (j, g) in g0.generators().iter().enumerate() {
                reject_parabolic(g, &format!("g0.{}", j + 1))?;
            }
        }
        let factors = factors
            .into_iter()
            .map(|f| {
                let circle = f.domain.as_ref().map(|d| Circle { outside: false, ..d.disc });
                let sides = f.domain.as_ref().map(|d| d.sides.clone()).filter(|s| !s.is_empty());
                let sides = match (&sides, f.generators.len()) {
                    (Some(s), n) if s.len() == 2 * n => sides,
                    _ => None,
                };
                Ok(Factor { group: FuchsianSpec::new(f.generators, circle, sides, f.schottky)?, domain: f.domain })
            })
            .collect::<Result<Vec<_>>>()?;
        let p0 = gamma0.as_ref().map_or(0, |g| g.genus());
        let genera: Vec<usize> = factors.iter().map(|f| f.genus()).collect();
        let rank = expected_rank(p0, &genera);
        if gamma.genus() != rank {
            return Err(Error::RankMismatch(format!(
                "Γ has rank {} but p₀ + Σ p_i = {rank}",
                gamma.genus()
            )));
        }
        let dictionary = dictionary.unwrap_or_else(|| (0..rank).collect());
        let mut seen = vec![false; rank];
        if dictionary.len() != rank || dictionary.iter().any(|&k| k >= rank || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::RankMismatch(format!("dictionary {dictionary:?} is not a permutation of 0..{rank}")));
        }
        Ok(KleinianSpec { factors, gamma0, gamma, dictionary })
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn gamma0(&self) -> Option<&SchottkyGroup> {
        self.gamma0.as_ref()
    }

    pub fn gamma(&self) -> &SchottkyGroup {
        &self.gamma
    }

    pub fn dictionary(&self) -> &[usize] {
        &self.dictionary
    }

    pub fn p0(&self) -> usize {
        self.gamma0.as_ref().map_or(0, |g| g.genus())
    }

    /// Ranks `[p₀, p₁, …, p_n]`.
    pub fn ranks(&self) -> Vec<u16> {
        std::iter::once(self.p0())
            .chain(self.factors.iter().map(|f| f.genus()))
            .map(|r| r as u16)
            .collect()
    }

    /// All generators of `G` (factor 0 is Γ₀, factor `i` holds `q_{i,1..2p_i}`).
    pub fn g_alphabet(&self) -> Alphabet {
        let ranks: Vec<u16> = std::iter::once(self.p0())
            .chain(self.factors.iter().map(|f| 2 * f.genus()))
            .map(|r| r as u16)
            .collect();
        Alphabet::new(&ranks)
    }

    /// Map of a letter of `G`.
    pub fn g_letter_map(&self, l: Letter) -> Result<MoebiusMap> {
        let m = match l.factor as usize {
            0 => *self
                .gamma0
                .as_ref()
                .and_then(|g| g.generators().get(l.index as usize))
                .ok_or_else(|| Error::NotAGenerator(l.to_string()))?,
            f => *self
                .factors
                .get(f - 1)
                .and_then(|q| q.group.generators().get(l.index as usize))
                .ok_or_else(|| Error::NotAGenerator(l.to_string()))?,
        };
        Ok(if l.inverse { m.inverse() } else { m })
    }

    pub fn g_word_to_map(&self, w: &Word) -> Result<MoebiusMap> {
        w.letters()
            .iter()
            .try_fold(MoebiusMap::identity(), |acc, &l| Ok(acc.compose(&self.g_letter_map(l)?)))
    }
}

/// The free subgroup `G₀` as a factor-tagged free group.
#[derive(Debug, Clone)]
pub struct G0Model {
    pub alphabet: Alphabet,
    /// `(letter, map)` for every generator, in alphabet order.
    pub generators: Vec<(Letter, MoebiusMap)>,
    offsets: Vec<usize>,
    dictionary: Vec<usize>,
}

impl G0Model {
    pub fn rank(&self) -> usize {
        self.alphabet.total_rank()
    }

    /// Flattened index of a generator letter.
    pub fn flat_index(&self, l: Letter) -> Option<usize> {
        let f = l.factor as usize;
        (f < self.offsets.len() && l.index < self.alphabet.ranks()[f]).then(|| self.offsets[f] + l.index as usize)
    }

    /// Letterwise image in `Γ`.
    pub fn to_gamma(&self, w: &Word) -> Result<Word> {
        let letters = w
            .letters()
            .iter()
            .map(|&l| {
                let k = self.flat_index(l).ok_or_else(|| Error::LetterOutsideF0(l.to_string()))?;
                let g = Letter::gen(self.dictionary[k] as u16);
                Ok(if l.inverse { g.inverse() } else { g })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Word::from_letters(&letters))
    }

    /// Letters of one flattened generator index.
    pub fn generator_letter(&self, k: usize) -> Letter {
        self.generators[k].0
    }
}

/// Builds `G₀ = Γ₀ ∗ Q₁₀ ∗ … ∗ Q_{n0}`.
pub fn assemble_g0(spec: &KleinianSpec) -> Result<G0Model> {
    let ranks = spec.ranks();
    let alphabet = Alphabet::new(&ranks);
    if alphabet.total_rank() != spec.gamma().genus() {
        return Err(Error::RankMismatch(format!(
            "G₀ has rank {} but Γ has rank {}",
            alphabet.total_rank(),
            spec.gamma().genus()
        )));
    }
    let mut offsets = Vec::with_capacity(ranks.len());
    let mut acc = 0;
    for &r in &ranks {
        offsets.push(acc);
        acc += r as usize;
    }
    let generators = alphabet
        .letters()
        .iter()
        .filter(|l| !l.inverse)
        .map(|&l| Ok((l, spec.g_letter_map(l)?)))
        .collect::<Result<Vec<_>>>()?;
    for (l, m) in &generators {
        if m.classify() != MapClass::Loxodromic {
            return Err(Error::NotLoxodromic(l.to_string()));
        }
    }
    Ok(G0Model { alphabet, generators, offsets, dictionary: spec.dictionary.clone() })
}

/// Membership in `K = (∪ F_i) ∪ ((∩ F_i') \ ∪ A_k)`, the `A_k` being the Γ₀ discs.
pub fn fundamental_domain_contains_k(spec: &KleinianSpec, z: SpherePoint) -> Result<bool> {
    let domains = spec
        .factors()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.domain
                .as_ref()
                .ok_or_else(|| Error::DomainDataMissing(format!("factor {} has no F/F' description", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if domains.iter().any(|d| d.f_contains(z)) {
        return Ok(true);
    }
    let in_all = domains.iter().all(|d| d.f_prime_contains(z));
    let off_a = spec.gamma0().is_none_or(|g| g.circles().iter().all(|c| c.rel_depth(z) <= MARKING_TOL));
    Ok(in_all && off_a)
}

fn same_disc(a: &Circle, b: &Circle) -> bool {
    let scale = a.radius.max(1.0);
    a.outside == b.outside && (a.center - b.center).norm() <= 1e-7 * scale && (a.radius - b.radius).abs() <= 1e-7 * scale
}

/// Sampled disjointness: for `|g| ≤ max_len`, `g(D_i)` equals `D_i` or misses it,
/// and misses every `D_j`, `j ≠ i`.
pub fn check_disc_lemmas(spec: &KleinianSpec, max_len: usize) -> Result<()> {
    let discs: Vec<(usize, Circle)> = spec
        .factors()
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.domain.as_ref().map(|d| (i, d.disc)))
        .collect();
    if discs.is_empty() {
        return Ok(());
    }
    let alphabet = spec.g_alphabet();
    for w in ball(&alphabet, max_len) {
        let m = spec.g_word_to_map(&w)?;
        for &(i, d) in &discs {
            let img = d.image(&m)?;
            for &(j, e) in &discs {
                let ok = if i == j { same_disc(&img, &e) || discs_disjoint(&img, &e) } else { discs_disjoint(&img, &e) };
                if !ok {
                    return Err(Error::DisjointnessViolated(format!("{w} moves D{} onto D{} partially", i + 1, j + 1)));
                }
            }
        }
    }
    Ok(())
}

/// Green's function of `S_{n+1}` for points in `Ω(Γ)` coordinates: the `G₀` sums
/// are carried to `Γ` by the dictionary and `X̄` solves the rank-`p_{n+1}` system.
pub fn green_sn1(
    spec: &KleinianSpec,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
) -> Result<GreenResult> {
    let gamma = spec.gamma();
    for z in [a, b, c, d] {
        if !gamma.fundamental_domain_contains(z) {
            return Err(Error::PointNotInFundamentalDomain(z.to_string()));
        }
    }
    for x in [a, b] {
        if x == c || x == d {
            return Err(Error::SupportsIntersect(x.to_string()));
        }
    }
    gamma.require_convergence()?;
    let model = assemble_g0(spec)?;
    let rank = model.rank();
    let rho = gamma.convergence().rho;

    let words = ball(&model.alphabet, max_len);
    let group_sum = sum_over_words(&words, max_len, |w| {
        let h = gamma.word_to_map(&model.to_gamma(w)?);
        let (hc, hd) = (h.apply(c), h.apply(d));
        for p in [hc, hd] {
            if let Some(distance) = [a, b].iter().map(|t| p.chordal_distance(t)).find(|&x| x < ORBIT_COLLISION_EPS) {
                return Err(Error::OrbitCollision { word: w.to_string(), distance });
            }
        }
        log_cr(a, b, hc, hd)
    })?;

    // Conjugacy classes of the G₀ generators with their fixed points in Γ.
    let mut classes = Vec::with_capacity(rank);
    for k in 0..rank {
        let g = Word::letter(model.generator_letter(k));
        classes.push(conjugacy_reps(&model.alphabet, &g, max_len)?);
    }
    let class_series = |k: usize, term: &(dyn Fn(SpherePoint, SpherePoint) -> Result<f64> + Sync)| -> Result<Graded<f64>> {
        sum_over_words(&classes[k], max_len, |w| {
            let (zp, zm) = gamma.word_to_map(&model.to_gamma(w)?).fixed_points()?;
            term(zp, zm)
        })
    };
    let rhs = (0..rank)
        .map(|k| class_series(k, &|zp, zm| log_cr(a, b, zp, zm)).map(|s| s.total()))
        .collect::<Result<Vec<_>>>()?;
    let class_sums = (0..rank)
        .map(|k| class_series(k, &|zp, zm| log_cr(zp, zm, c, d)))
        .collect::<Result<Vec<_>>>()?;

    let (x, cond) = if rank == 0 {
        (Vec::new(), 1.0)
    } else {
        let tau = tau_matrix(gamma, max_len)?;
        let dict = &model.dictionary;
        let m = DMatrix::from_fn(rank, rank, |i, j| tau.entries[dict[i]][dict[j]].re);
        let cond = condition_number(&m);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        let sol = m.lu().solve(&DVector::from_vec(rhs)).ok_or(Error::IllConditioned(f64::INFINITY))?;
        (sol.iter().copied().collect::<Vec<_>>(), cond)
    };
    let value = group_sum.total() - x.iter().zip(&class_sums).map(|(xk, s)| xk * s.total()).sum::<f64>();
    let group_sum_tail = tail_estimate(group_sum.last_magnitude(), rho);
    let class_sum_tails: Vec<f64> = class_sums
        .iter()
        .map(|s| {
            let n = s.abs_by_length.len();
            tail_estimate(s.abs_by_length[n.saturating_sub(2)..].iter().cloned().fold(0.0, f64::max), rho)
        })
        .collect();
    let tail = group_sum_tail + x.iter().zip(&class_sum_tails).map(|(xk, t)| xk.abs() * t).sum::<f64>();
    Ok(GreenResult { value, max_len, tail, rho, x, condition_number: cond, group_sum_tail, class_sum_tails })
}

/// Green's function of the component `S_i` (1-based), through the factor's own
/// Schottky partner.
pub fn component_green(
    spec: &KleinianSpec,
    i: usize,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
) -> Result<GreenResult> {
    let f = i
        .checked_sub(1)
        .and_then(|k| spec.factors().get(k))
        .ok_or_else(|| Error::FactorDataMissing(format!("no factor {i} among {}", spec.n())))?;
    green_s0(&f.group, a, b, c, d, max_len, Side::S0)
}

/// Fixed points of all generators of `G` and their images under `G` words of
/// length `≤ max_len`: a sample of `Λ(G)`. Entry `(w, l, z)` is `z = w(z⁺(l))`.
pub fn limit_set_sample(spec: &KleinianSpec, max_len: usize) -> Result<Vec<(Word, Letter, SpherePoint)>> {
    let alphabet = spec.g_alphabet();
    let mut seeds = Vec::new();
    for l in alphabet.letters() {
        let (zp, _) = spec.g_letter_map(*l)?.fixed_points()?;
        seeds.push((*l, zp));
    }
    let mut out = Vec::new();
    for gen in free_product_enumerate(alphabet.ranks(), max_len) {
        for w in &gen.words {
            let m = spec.g_word_to_map(w)?;
            out.extend(seeds.iter().map(|&(l, z)| (w.clone(), l, m.apply(z))));
        }
    }
    Ok(out)
}
