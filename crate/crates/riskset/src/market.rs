//! Multi-asset markets on scenario trees: solvency cones, trading
//! constraints, liquidation, and risk minimization over reachable positions.
//!
//! A market holds one solvency cone and one constraint set per tree node.
//! Trading a vector `u` at a node subtracts `u` from the position on every
//! atom below the node, so a plan with one trade per node turns a position
//! `Y` into `Y - sum of trades along each path`. The cone says which trades
//! are solvent (exchangeable into nonnegative holdings), the constraint set
//! caps them.
//!
//! The minimized risk of a position over all plans that liquidate it into
//! the first `m` assets is computed through its scalarizations: for a
//! weight `w >= 0` the value `inf { w'z }` over the minimized region is a
//! single linear program when the regulator's losses are piecewise linear.
//! Variables are the capital vector `z`, one weight per cone generator per
//! node, and one epigraph value per atom and component; exactness of the
//! epigraph encoding follows from the comparison set being an upper set.
//! Exponential losses have no linear epigraph, so that path runs a
//! projected gradient descent on the trade weights instead; the inner
//! supremum over index vectors is independent of the position there and is
//! resolved once by `entropic_optimal_index`.
//!
//! Dual objects mirror the primal ones: `wcone_membership` tests whether a
//! measure-weight pair prices every node cone consistently,
//! `market_penalty` evaluates the penalty of the extension (the regulator
//! penalty after truncation, whole space off the consistent set), and
//! `finiteness_check` looks for one weight supporting every cone at every
//! node, the condition keeping scalarizations away from `-inf`.

use crate::config::NumericConfig;
use crate::entropic::{entropic_optimal_index, log_exp_moment, EntropicSpec, OptimalIndex};
use crate::error::{Error, Result};
use crate::loss::{LossKind, VectorLossSpec};
use crate::poly::{dot, Halfspace, ThresholdData};
use crate::set_risk::{penalty_shortfall_set, PenaltyValue};
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::space::{same_space, RandomVector, VectorMeasure};
use crate::tree::ScenarioTree;
use crate::xreal::{Finite, NegInf, PosInf, XReal};

/// Hard cap on LP columns; the bundled solver is dense.
const LP_VAR_CAP: usize = 2000;

/// Membership slack for cone and constraint checks.
const CONE_TOL: f64 = 1e-9;

/// A closed convex polyhedral cone in `R^d`, listed by generators.
///
/// Facet halfspaces (all through the origin) are derived from the
/// generators for `d <= 3` when the cone enters a [`MarketModel`]; in
/// higher dimension they must be supplied with [`Cone::with_facets`] or
/// membership tests fall back to a small feasibility program.
#[derive(Debug, Clone)]
pub struct Cone {
    dim: usize,
    generators: Vec<Vec<f64>>,
    facets: Option<Vec<Halfspace>>,
}

impl Cone {
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("cone dimension must be positive"));
        }
        if generators.is_empty() {
            return Err(Error::invalid("cone needs at least one generator"));
        }
        for (j, g) in generators.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::dimension(format!(
                    "generator {j} has length {}, expected {dim}",
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("generator {j} has non-finite entries")));
            }
            if g.iter().all(|&v| v == 0.0) {
                return Err(Error::invalid(format!("generator {j} is zero")));
            }
        }
        Ok(Cone { dim, generators, facets: None })
    }

    /// The cone `R^d_+` itself: one unit generator per axis.
    pub fn orthant(dim: usize) -> Result<Self> {
        let generators = (0..dim)
            .map(|i| {
                let mut g = vec![0.0; dim];
                g[i] = 1.0;
                g
            })
            .collect();
        let mut cone = Cone::new(dim, generators)?;
        cone.facets = Some(cone.generators.iter().map(|g| Halfspace::new(g.clone(), 0.0)).collect::<Result<_>>()?);
        Ok(cone)
    }

    /// Attaches a caller-computed facet description `{y : n_j'y >= 0}`.
    ///
    /// Every generator must satisfy every facet; offsets must vanish.
    pub fn with_facets(mut self, facets: Vec<Halfspace>) -> Result<Self> {
        for h in &facets {
            if h.dim() != self.dim {
                return Err(Error::dimension("facet dimension differs from the cone"));
            }
            if h.offset().abs() > 1e-12 {
                return Err(Error::invalid("cone facets must pass through the origin"));
            }
        }
        for (j, g) in self.generators.iter().enumerate() {
            let scale = norm_inf(g).max(1.0);
            for h in &facets {
                if dot(h.normal(), g) < -CONE_TOL * scale {
                    return Err(Error::invalid(format!(
                        "generator {j} violates a supplied facet"
                    )));
                }
            }
        }
        self.facets = Some(facets);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Facet halfspaces, when derived or supplied.
    pub fn facets(&self) -> Option<&[Halfspace]> {
        self.facets.as_deref()
    }

    /// Generators rescaled to unit max-norm, for scale-free tolerance tests.
    fn unit_generators(&self) -> Vec<Vec<f64>> {
        self.generators
            .iter()
            .map(|g| {
                let s = norm_inf(g);
                g.iter().map(|v| v / s).collect()
            })
            .collect()
    }

    /// Membership within an absolute tolerance scaled by `max(1, |y|_inf)`.
    ///
    /// Uses the facet description when present; otherwise solves for the
    /// L1-closest conic combination and compares the gap to the tolerance.
    pub fn contains(&self, y: &[f64], tol: f64, lp_tol: f64) -> Result<bool> {
        if y.len() != self.dim {
            return Err(Error::dimension("point dimension differs from the cone"));
        }
        let scale = norm_inf(y).max(1.0);
        if let Some(facets) = &self.facets {
            return Ok(facets.iter().all(|h| dot(h.normal(), y) >= -tol * scale));
        }
        let ng = self.generators.len();
        let gens = self.unit_generators();
        // min sum(s+ + s-) with G lam + s+ - s- = y, everything nonnegative.
        let n = ng + 2 * self.dim;
        let mut lp = LinearProgram::new(n);
        for i in 0..self.dim {
            lp.objective_coeff(ng + i, 1.0);
            lp.objective_coeff(ng + self.dim + i, 1.0);
        }
        for i in 0..self.dim {
            let mut row = vec![0.0; n];
            for (j, g) in gens.iter().enumerate() {
                row[j] = g[i];
            }
            row[ng + i] = 1.0;
            row[ng + self.dim + i] = -1.0;
            lp.add_row(&row, Relation::Eq, y[i]);
        }
        match lp.solve(lp_tol)? {
            LpOutcome::Optimal { value, .. } => Ok(value <= tol * scale),
            LpOutcome::Infeasible => Ok(false),
            LpOutcome::Unbounded { .. } => unreachable!("distance objective is bounded below"),
        }
    }

    /// Derives the facet halfspaces from the generators, `d <= 3` only.
    ///
    /// Preconditions match the market invariants: the cone contains the
    /// positive orthant (so it is full-dimensional) and meets the negative
    /// orthant only at the origin.
    fn derive_facets(&self) -> Result<Vec<Halfspace>> {
        match self.dim {
            1 => {
                if self.generators.iter().any(|g| g[0] < 0.0) {
                    return Err(Error::invalid("cone meets the negative half-line"));
                }
                Ok(vec![Halfspace::new(vec![1.0], 0.0)?])
            }
            2 => self.derive_facets_2d(),
            3 => self.derive_facets_3d(),
            d => Err(Error::precondition(format!(
                "facet derivation is implemented for dimension <= 3; \
                 supply facets explicitly for dimension {d}"
            ))),
        }
    }

    /// In the plane the cone is an angular interval; its two edges (or the
    /// single boundary of a halfplane) give the facets.
    fn derive_facets_2d(&self) -> Result<Vec<Halfspace>> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for g in &self.generators {
            let a = g[1].atan2(g[0]);
            // Valid market cones keep every generator out of the closed
            // negative orthant, which pins all angles into (-pi/2, pi).
            if !(-std::f64::consts::FRAC_PI_2..std::f64::consts::PI).contains(&a)
                || a == -std::f64::consts::FRAC_PI_2
            {
                return Err(Error::invalid("cone meets the negative orthant"));
            }
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let span = hi - lo;
        if span > std::f64::consts::PI + 1e-9 {
            return Err(Error::invalid("generators span more than a halfplane"));
        }
        let edge_lo = Halfspace::new(vec![-lo.sin(), lo.cos()], 0.0)?;
        if span >= std::f64::consts::PI - 1e-9 {
            // Halfplane: the two edges coincide as a line.
            return Ok(vec![edge_lo]);
        }
        let edge_hi = Halfspace::new(vec![hi.sin(), -hi.cos()], 0.0)?;
        Ok(vec![edge_lo, edge_hi])
    }

    /// Every facet of a full-dimensional cone in `R^3` is spanned by two of
    /// the generators, so cross products of generator pairs enumerate all
    /// candidate normals; a sign test keeps the supporting ones.
    fn derive_facets_3d(&self) -> Result<Vec<Halfspace>> {
        let gens = self.unit_generators();
        let mut normals: Vec<Vec<f64>> = Vec::new();
        for i in 0..gens.len() {
            for j in (i + 1)..gens.len() {
                let n = cross(&gens[i], &gens[j]);
                let s = norm_inf(&n);
                if s <= 1e-12 {
                    continue;
                }
                let n: Vec<f64> = n.iter().map(|v| v / s).collect();
                let prods: Vec<f64> = gens.iter().map(|g| dot(&n, g)).collect();
                let oriented = if prods.iter().all(|&p| p >= -CONE_TOL) {
                    Some(n)
                } else if prods.iter().all(|&p| p <= CONE_TOL) {
                    Some(n.iter().map(|v| -v).collect())
                } else {
                    None
                };
                if let Some(n) = oriented {
                    if !normals.iter().any(|k| {
                        k.iter().zip(&n).all(|(a, b)| (a - b).abs() <= 1e-9)
                    }) {
                        normals.push(n);
                    }
                }
            }
        }
        if normals.is_empty() {
            return Err(Error::invalid(
                "no supporting facet found; the generators span the whole space",
            ));
        }
        normals
            .into_iter()
            .map(|n| Halfspace::new(n, 0.0))
            .collect()
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn check_direction(w: &[f64], what: &str) -> Result<()> {
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::precondition(format!(
            "{what} must be componentwise nonnegative and finite"
        )));
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::precondition(format!("{what} must be nonzero")));
    }
    Ok(())
}

/// Per-node restriction on the trade vector, on top of the solvency cone.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// Trading limited by the cone alone.
    AllSpace,
    /// Componentwise caps `u_i <= cap_i`; caps are nonnegative so the zero
    /// trade stays admissible.
    Caps { caps: Vec<f64> },
    /// One aggregate bound `a'u <= b` with `a >= 0`, `a != 0`, `b >= 0`.
    Budget { a: Vec<f64>, b: f64 },
}

impl Constraint {
    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Constraint::AllSpace => Ok(()),
            Constraint::Caps { caps } => {
                if caps.len() != d {
                    return Err(Error::dimension("cap vector length differs from the asset count"));
                }
                if caps.iter().any(|&c| !c.is_finite() || c < 0.0) {
                    return Err(Error::invalid("caps must be finite and nonnegative"));
                }
                Ok(())
            }
            Constraint::Budget { a, b } => {
                if a.len() != d {
                    return Err(Error::dimension("budget normal length differs from the asset count"));
                }
                check_direction(a, "budget normal")?;
                if !b.is_finite() || *b < 0.0 {
                    return Err(Error::invalid("budget level must be finite and nonnegative"));
                }
                Ok(())
            }
        }
    }

    fn contains(&self, u: &[f64], tol: f64) -> bool {
        let scale = norm_inf(u).max(1.0);
        match self {
            Constraint::AllSpace => true,
            Constraint::Caps { caps } => {
                u.iter().zip(caps).all(|(&ui, &ci)| ui <= ci + tol * scale)
            }
            Constraint::Budget { a, b } => dot(a, u) <= b + tol * scale,
        }
    }

    fn is_all_space(&self) -> bool {
        matches!(self, Constraint::AllSpace)
    }
}

/// A scenario tree with one solvency cone and one constraint per node.
#[derive(Debug, Clone)]
pub struct MarketModel {
    tree: ScenarioTree,
    d: usize,
    cones: Vec<Cone>,
    constraints: Vec<Constraint>,
}

impl MarketModel {
    /// Builds and validates a model. `cones` and `constraints` are indexed
    /// by internal node index (the order of [`ScenarioTree::nodes`]).
    ///
    /// Every cone must contain the positive orthant (all holdings can be
    /// thrown away) and meet the negative orthant only at the origin (no
    /// position strictly dominated by zero is solvent); every constraint
    /// must admit the zero trade. Facet descriptions are derived here for
    /// up to three assets when not supplied.
    pub fn new(
        tree: ScenarioTree,
        cones: Vec<Cone>,
        constraints: Vec<Constraint>,
        cfg: &NumericConfig,
    ) -> Result<Self> {
        if cones.len() != tree.num_nodes() || constraints.len() != tree.num_nodes() {
            return Err(Error::dimension(format!(
                "expected one cone and one constraint per node ({} nodes, {} cones, {} constraints)",
                tree.num_nodes(),
                cones.len(),
                constraints.len()
            )));
        }
        let d = cones[0].dim();
        let mut cones = cones;
        for (idx, cone) in cones.iter_mut().enumerate() {
            let id = tree.node(idx).id;
            if cone.dim() != d {
                return Err(Error::dimension(format!(
                    "cone at node {id} lives in dimension {}, expected {d}",
                    cone.dim()
                )));
            }
            validate_cone_contains_orthant(cone, id, cfg.lp_tol)?;
            validate_cone_meets_negative_orthant_trivially(cone, id, cfg.lp_tol)?;
            if cone.facets.is_none() && d <= 3 {
                cone.facets = Some(cone.derive_facets()?);
            }
        }
        for (idx, c) in constraints.iter().enumerate() {
            c.validate(d).map_err(|e| {
                Error::invalid(format!("constraint at node {}: {e}", tree.node(idx).id))
            })?;
        }
        Ok(MarketModel { tree, d, cones, constraints })
    }

    /// Convenience: the same cone and constraint at every node.
    pub fn uniform(
        tree: ScenarioTree,
        cone: Cone,
        constraint: Constraint,
        cfg: &NumericConfig,
    ) -> Result<Self> {
        let n = tree.num_nodes();
        MarketModel::new(tree, vec![cone; n], vec![constraint; n], cfg)
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    /// Number of assets.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn cone(&self, node: usize) -> &Cone {
        &self.cones[node]
    }

    pub fn constraint(&self, node: usize) -> &Constraint {
        &self.constraints[node]
    }

    /// True when no node carries a constraint beyond its cone.
    pub fn is_unconstrained(&self) -> bool {
        self.constraints.iter().all(Constraint::is_all_space)
    }

    /// Checks one trade per node, each inside its cone and constraint.
    pub fn validate_plan(&self, plan: &TradePlan, cfg: &NumericConfig) -> Result<()> {
        if plan.trades.len() != self.tree.num_nodes() {
            return Err(Error::dimension(format!(
                "plan has {} trades, expected one per node ({})",
                plan.trades.len(),
                self.tree.num_nodes()
            )));
        }
        for (idx, u) in plan.trades.iter().enumerate() {
            let id = self.tree.node(idx).id;
            if u.len() != self.d {
                return Err(Error::dimension(format!(
                    "trade at node {id} has length {}, expected {}",
                    u.len(),
                    self.d
                )));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("trade at node {id} has non-finite entries")));
            }
            if !self.cones[idx].contains(u, cfg.membership_tol, cfg.lp_tol)? {
                return Err(Error::precondition(format!(
                    "trade at node {id} is not solvent (outside the node cone)"
                )));
            }
            if !self.constraints[idx].contains(u, cfg.membership_tol) {
                return Err(Error::precondition(format!(
                    "trade at node {id} violates the node constraint"
                )));
            }
        }
        Ok(())
    }
}

/// Every basis vector must be a conic combination of the generators.
fn validate_cone_contains_orthant(cone: &Cone, id: u64, lp_tol: f64) -> Result<()> {
    let gens = cone.unit_generators();
    let d = cone.dim();
    for i in 0..d {
        let mut lp = LinearProgram::new(gens.len());
        for row_i in 0..d {
            let coeffs: Vec<f64> = gens.iter().map(|g| g[row_i]).collect();
            lp.add_row(&coeffs, Relation::Eq, if row_i == i { 1.0 } else { 0.0 });
        }
        if !lp.solve(lp_tol)?.is_feasible() {
            return Err(Error::invalid(format!(
                "cone at node {id} does not allow disposal of asset {i}: \
                 the basis vector is not a conic combination of the generators"
            )));
        }
    }
    Ok(())
}

/// No nonzero conic combination may be componentwise nonpositive; such a
/// combination would make a position strictly dominated by zero solvent.
fn validate_cone_meets_negative_orthant_trivially(cone: &Cone, id: u64, lp_tol: f64) -> Result<()> {
    let gens = cone.unit_generators();
    let d = cone.dim();
    let ng = gens.len();
    let mut lp = LinearProgram::new(ng);
    // min 1'(G lam) over G lam <= 0, sum lam = 1: any strictly negative
    // optimum scales into a nonzero point of the intersection.
    let obj: Vec<f64> = gens.iter().map(|g| g.iter().sum()).collect();
    lp.set_objective(&obj);
    for i in 0..d {
        let coeffs: Vec<f64> = gens.iter().map(|g| g[i]).collect();
        lp.add_row(&coeffs, Relation::Le, 0.0);
    }
    lp.add_row(&vec![1.0; ng], Relation::Eq, 1.0);
    match lp.solve(lp_tol)? {
        LpOutcome::Infeasible => Ok(()),
        LpOutcome::Optimal { value, .. } if value >= -1e-7 => Ok(()),
        LpOutcome::Optimal { .. } => Err(Error::invalid(format!(
            "cone at node {id} meets the negative orthant away from the origin"
        ))),
        LpOutcome::Unbounded { .. } => unreachable!("feasible set is a simplex slice"),
    }
}

/// One trade vector per tree node, executed on the node's whole cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TradePlan {
    trades: Vec<Vec<f64>>,
}

impl TradePlan {
    pub fn new(trades: Vec<Vec<f64>>) -> Self {
        TradePlan { trades }
    }

    pub fn zero(model: &MarketModel) -> Self {
        TradePlan {
            trades: vec![vec![0.0; model.d()]; model.tree().num_nodes()],
        }
    }

    pub fn trade(&self, node: usize) -> &[f64] {
        &self.trades[node]
    }

    pub fn trades(&self) -> &[Vec<f64>] {
        &self.trades
    }
}

/// The position reached from `y` under a plan: atomwise, `y` minus the sum
/// of the trades at the nodes on the atom's path.
pub fn reachable(
    y: &RandomVector,
    plan: &TradePlan,
    model: &MarketModel,
    cfg: &NumericConfig,
) -> Result<RandomVector> {
    if y.dim() != model.d() {
        return Err(Error::dimension("position dimension differs from the asset count"));
    }
    if !same_space(y.space(), model.tree().space()) {
        return Err(Error::dimension("position lives on a different space than the tree"));
    }
    model.validate_plan(plan, cfg)?;
    let space = model.tree().space().clone();
    let mut rows = Vec::with_capacity(space.len());
    for k in 0..space.len() {
        let mut row: Vec<f64> = (0..model.d()).map(|i| y.value(k, i)).collect();
        for n in model.tree().path_to_atom(k) {
            for (i, v) in row.iter_mut().enumerate() {
                *v -= plan.trades[n][i];
            }
        }
        rows.push(row);
    }
    RandomVector::new(space, rows)
}

/// Componentwise loss with an acceptance threshold on the liquidated assets.
#[derive(Debug, Clone)]
pub struct Regulator {
    losses: VectorLossSpec,
    thresh: ThresholdData,
}

impl Regulator {
    pub fn new(losses: VectorLossSpec, thresh: ThresholdData) -> Result<Self> {
        if losses.dim() != thresh.dim() {
            return Err(Error::dimension("loss and threshold dimensions differ"));
        }
        Ok(Regulator { losses, thresh })
    }

    /// Number of eligible assets the position is liquidated into.
    pub fn m(&self) -> usize {
        self.losses.dim()
    }

    pub fn losses(&self) -> &VectorLossSpec {
        &self.losses
    }

    pub fn thresh(&self) -> &ThresholdData {
        &self.thresh
    }
}

enum LossClass {
    PiecewiseLinear,
    Exponential(Vec<f64>),
}

fn classify_losses(losses: &VectorLossSpec) -> Result<LossClass> {
    if losses.is_piecewise_linear() {
        return Ok(LossClass::PiecewiseLinear);
    }
    let mut betas = Vec::with_capacity(losses.dim());
    for i in 0..losses.dim() {
        match losses.component(i).kind() {
            LossKind::Exponential { beta } => betas.push(*beta),
            _ => {
                return Err(Error::precondition(
                    "losses must be all piecewise-linear or all exponential",
                ))
            }
        }
    }
    Ok(LossClass::Exponential(betas))
}

/// Scalarized value of the minimized region together with how it ended.
#[derive(Debug, Clone)]
pub struct MarketSupport {
    /// `inf { w'z }` over the region; `-inf` when trading drives the value
    /// down without bound, `+inf` when no plan liquidates the position.
    pub value: XReal,
    pub status: SupportStatus,
}

#[derive(Debug, Clone)]
pub enum SupportStatus {
    /// Minimum attained at this capital vector and plan.
    Attained { z: Vec<f64>, plan: TradePlan },
    /// The program recedes; the improving direction is reported when the
    /// linear programming path produced one.
    Unbounded { ray: Option<UnboundedRay> },
    /// No admissible plan liquidates the position into the eligible assets
    /// while meeting the threshold.
    Infeasible,
}

/// A feasible direction along which the scalarized objective decreases
/// without bound.
#[derive(Debug, Clone)]
pub struct UnboundedRay {
    pub z: Vec<f64>,
    pub plan: TradePlan,
}

/// Variable layout of the trade program: `z` block (optional), one block of
/// generator weights per node, then one epigraph value per atom and
/// component.
struct TradeLp {
    lp: LinearProgram,
    m: usize,
    has_z: bool,
    lam: Vec<usize>,
    e0: usize,
}

impl TradeLp {
    fn z_index(&self, i: usize) -> usize {
        debug_assert!(self.has_z);
        i
    }

    fn e_index(&self, atom: usize, comp: usize) -> usize {
        self.e0 + atom * self.m + comp
    }
}

fn assemble_trade_lp(
    y: &RandomVector,
    reg: &Regulator,
    model: &MarketModel,
    with_z: bool,
) -> Result<TradeLp> {
    let d = model.d();
    let m = reg.m();
    if m > d {
        return Err(Error::dimension(format!(
            "regulator covers {m} assets but the market has only {d}"
        )));
    }
    if y.dim() != d {
        return Err(Error::dimension("position dimension differs from the asset count"));
    }
    let tree = model.tree();
    if !same_space(y.space(), tree.space()) {
        return Err(Error::dimension("position lives on a different space than the tree"));
    }
    let space = tree.space();
    let n_atoms = space.len();

    let majorants: Vec<Vec<(f64, f64)>> = (0..m)
        .map(|i| {
            reg.losses.component(i).affine_majorants().ok_or_else(|| {
                Error::precondition("the linear programming path needs piecewise-linear losses")
            })
        })
        .collect::<Result<_>>()?;
    let dom_sups: Vec<XReal> = (0..m).map(|i| reg.losses.component(i).dom_sup()).collect();

    let z_count = if with_z { m } else { 0 };
    let mut lam = Vec::with_capacity(tree.num_nodes());
    let mut cursor = z_count;
    for idx in 0..tree.num_nodes() {
        lam.push(cursor);
        cursor += model.cone(idx).generators().len();
    }
    let e0 = cursor;
    let n_vars = e0 + n_atoms * m;
    if n_vars > LP_VAR_CAP {
        return Err(Error::invalid(format!(
            "trade program needs {n_vars} variables, beyond the dense solver cap {LP_VAR_CAP}"
        )));
    }

    let mut lp = LinearProgram::new(n_vars);
    for i in 0..z_count {
        lp.free_var(i);
    }
    for v in e0..n_vars {
        lp.free_var(v);
    }
    let layout = TradeLp { lp, m, has_z: with_z, lam, e0 };
    let mut lp = layout.lp;

    // Trade coefficients of the position component i on atom k: the entry
    // g[i] for every generator of every node on the atom's path.
    let path_cols: Vec<Vec<usize>> = (0..n_atoms).map(|k| tree.path_to_atom(k)).collect();
    let mut add_path_coeffs = |row: &mut [f64], k: usize, i: usize, scale: f64| {
        for &n in &path_cols[k] {
            let off = layout.lam[n];
            for (t, g) in model.cone(n).generators().iter().enumerate() {
                row[off + t] += scale * g[i];
            }
        }
    };

    // Liquidation: the non-eligible components of the reached position must
    // vanish on every atom.
    for k in 0..n_atoms {
        for j in m..d {
            let mut row = vec![0.0; n_vars];
            add_path_coeffs(&mut row, k, j, 1.0);
            lp.add_row(&row, Relation::Eq, y.value(k, j));
        }
    }

    for k in 0..n_atoms {
        for i in 0..m {
            // Bounded loss domain: the argument -X - z may not pass the
            // right end, else the expected loss is infinite.
            if let Finite(r_end) = dom_sups[i] {
                let mut row = vec![0.0; n_vars];
                add_path_coeffs(&mut row, k, i, 1.0);
                if with_z {
                    row[layout.z_index(i)] = -1.0;
                }
                lp.add_row(&row, Relation::Le, r_end + y.value(k, i));
            }
            // Epigraph: e >= s * (-X - z) + c for every affine piece, with
            // X = Y - (path trade sum) substituted in.
            for &(s, c) in &majorants[i] {
                let mut row = vec![0.0; n_vars];
                row[layout.e_index(k, i)] = 1.0;
                if with_z {
                    row[layout.z_index(i)] = s;
                }
                add_path_coeffs(&mut row, k, i, -s);
                lp.add_row(&row, Relation::Ge, c - s * y.value(k, i));
            }
        }
    }

    // Threshold: x0 - E[e] stays in the comparison set. Upper-set normals
    // make the epigraph relaxation exact.
    for h in reg.thresh.comparison_set().halfspaces() {
        let a = h.normal();
        let mut row = vec![0.0; n_vars];
        for k in 0..n_atoms {
            let pk = space.prob(k);
            for i in 0..m {
                row[layout.e_index(k, i)] = -a[i] * pk;
            }
        }
        lp.add_row(&row, Relation::Ge, h.offset() - dot(a, reg.thresh.x0()));
    }

    // Per-node trading constraints on the trade vector G lam.
    for idx in 0..tree.num_nodes() {
        let off = layout.lam[idx];
        let gens = model.cone(idx).generators();
        match model.constraint(idx) {
            Constraint::AllSpace => {}
            Constraint::Caps { caps } => {
                for (i, &cap) in caps.iter().enumerate() {
                    let mut row = vec![0.0; n_vars];
                    for (t, g) in gens.iter().enumerate() {
                        row[off + t] = g[i];
                    }
                    lp.add_row(&row, Relation::Le, cap);
                }
            }
            Constraint::Budget { a, b } => {
                let mut row = vec![0.0; n_vars];
                for (t, g) in gens.iter().enumerate() {
                    row[off + t] = dot(a, g);
                }
                lp.add_row(&row, Relation::Le, *b);
            }
        }
    }

    Ok(TradeLp { lp, ..layout })
}

/// Reads the per-node trades out of an LP point (or ray).
fn plan_from_point(x: &[f64], layout: &TradeLp, model: &MarketModel) -> TradePlan {
    let mut trades = Vec::with_capacity(model.tree().num_nodes());
    for idx in 0..model.tree().num_nodes() {
        let off = layout.lam[idx];
        let mut u = vec![0.0; model.d()];
        for (t, g) in model.cone(idx).generators().iter().enumerate() {
            let lam = x[off + t];
            for (i, v) in u.iter_mut().enumerate() {
                *v += lam * g[i];
            }
        }
        trades.push(u);
    }
    TradePlan { trades }
}

/// `inf { w'z }` over the union of regulator regions of all liquidations of
/// `y`, the scalarization of the market-minimized risk in direction `w`.
///
/// Piecewise-linear losses solve one linear program exactly; exponential
/// losses run a projected gradient descent over the trade weights and
/// require full liquidation (`m = d`) and an unconstrained model.
pub fn market_extension_support(
    y: &RandomVector,
    reg: &Regulator,
    model: &MarketModel,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<MarketSupport> {
    if w.len() != reg.m() {
        return Err(Error::dimension("direction length differs from the regulator dimension"));
    }
    check_direction(w, "direction")?;
    match classify_losses(&reg.losses)? {
        LossClass::PiecewiseLinear => {
            let mut layout = assemble_trade_lp(y, reg, model, true)?;
            for (i, &wi) in w.iter().enumerate() {
                layout.lp.objective_coeff(layout.z_index(i), wi);
            }
            match layout.lp.solve(cfg.lp_tol)? {
                LpOutcome::Optimal { x, value } => {
                    let z = x[..reg.m()].to_vec();
                    let plan = plan_from_point(&x, &layout, model);
                    Ok(MarketSupport {
                        value: Finite(value),
                        status: SupportStatus::Attained { z, plan },
                    })
                }
                LpOutcome::Unbounded { ray } => {
                    let z = ray[..reg.m()].to_vec();
                    let plan = plan_from_point(&ray, &layout, model);
                    Ok(MarketSupport {
                        value: NegInf,
                        status: SupportStatus::Unbounded {
                            ray: Some(UnboundedRay { z, plan }),
                        },
                    })
                }
                LpOutcome::Infeasible => Ok(MarketSupport {
                    value: PosInf,
                    status: SupportStatus::Infeasible,
                }),
            }
        }
        LossClass::Exponential(betas) => entropic_market_support(y, &betas, reg, model, w, cfg),
    }
}

/// Exponential-loss path: minimize `sum_i w_i log E[exp(-b_i X_i)] / b_i`
/// over trade weights; the index supremum contributes a position-free
/// constant resolved by `entropic_optimal_index`.
fn entropic_market_support(
    y: &RandomVector,
    betas: &[f64],
    reg: &Regulator,
    model: &MarketModel,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<MarketSupport> {
    let d = model.d();
    if reg.m() != d {
        return Err(Error::precondition(
            "exponential losses require full liquidation (as many eligible assets as traded ones)",
        ));
    }
    if !model.is_unconstrained() {
        return Err(Error::precondition(
            "exponential losses require a model without per-node constraint sets",
        ));
    }
    if y.dim() != d {
        return Err(Error::dimension("position dimension differs from the asset count"));
    }
    let tree = model.tree();
    if !same_space(y.space(), tree.space()) {
        return Err(Error::dimension("position lives on a different space than the tree"));
    }

    let spec = EntropicSpec::new(betas.to_vec(), reg.thresh.clone())?;
    let report = match entropic_optimal_index(&spec, w, cfg)? {
        OptimalIndex::Improper => {
            // The support term of the comparison set is -inf for every
            // index, so the scalarization carries no information.
            return Ok(MarketSupport {
                value: NegInf,
                status: SupportStatus::Unbounded { ray: None },
            });
        }
        OptimalIndex::Proper(report) => report,
    };

    let space = tree.space().clone();
    let n_atoms = space.len();
    let mut lam_off = Vec::with_capacity(tree.num_nodes());
    let mut cursor = 0usize;
    for idx in 0..tree.num_nodes() {
        lam_off.push(cursor);
        cursor += model.cone(idx).generators().len();
    }
    let n_lam = cursor;
    let paths: Vec<Vec<usize>> = (0..n_atoms).map(|k| tree.path_to_atom(k)).collect();

    // Position columns under the plan G lam, one per component.
    let columns = |lam: &[f64]| -> Vec<Vec<f64>> {
        let mut trades: Vec<Vec<f64>> = Vec::with_capacity(tree.num_nodes());
        for idx in 0..tree.num_nodes() {
            let off = lam_off[idx];
            let mut u = vec![0.0; d];
            for (t, g) in model.cone(idx).generators().iter().enumerate() {
                let l = lam[off + t];
                for (i, v) in u.iter_mut().enumerate() {
                    *v += l * g[i];
                }
            }
            trades.push(u);
        }
        let mut cols = vec![vec![0.0; n_atoms]; d];
        for k in 0..n_atoms {
            for (i, col) in cols.iter_mut().enumerate() {
                let mut v = y.value(k, i);
                for &n in &paths[k] {
                    v -= trades[n][i];
                }
                col[k] = v;
            }
        }
        cols
    };
    let objective = |cols: &[Vec<f64>]| -> f64 {
        (0..d)
            .map(|i| w[i] / betas[i] * log_exp_moment(&space, &cols[i], betas[i]))
            .sum()
    };

    let mut lam = vec![0.0; n_lam];
    let mut cols = columns(&lam);
    let mut f = objective(&cols);
    let mut step = 1.0f64;
    let mut iterations = 0u32;
    while (iterations as usize) < cfg.subgrad_iters {
        iterations += 1;
        // Gradient via the tilted weights p_k exp(-b X - log M), which sum
        // to one per component.
        let mut grad = vec![0.0; n_lam];
        for i in 0..d {
            if w[i] == 0.0 {
                continue;
            }
            let lnm = log_exp_moment(&space, &cols[i], betas[i]);
            let gibbs: Vec<f64> = (0..n_atoms)
                .map(|k| space.prob(k) * (-betas[i] * cols[i][k] - lnm).exp())
                .collect();
            for idx in 0..tree.num_nodes() {
                let (a, b) = tree.node(idx).leaf_range;
                let mass: f64 = gibbs[a..b].iter().sum();
                let off = lam_off[idx];
                for (t, g) in model.cone(idx).generators().iter().enumerate() {
                    grad[off + t] += w[i] * mass * g[i];
                }
            }
        }
        let pg = lam
            .iter()
            .zip(&grad)
            .map(|(&l, &g)| if l > 0.0 { g.abs() } else { (-g).max(0.0) })
            .fold(0.0f64, f64::max);
        if pg <= 1e-10 * (1.0 + f.abs()) {
            break;
        }
        // Projected backtracking line search.
        step = (step * 2.0).min(1e8);
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = lam
                .iter()
                .zip(&grad)
                .map(|(&l, &g)| (l - step * g).max(0.0))
                .collect();
            let dec: f64 = grad
                .iter()
                .zip(lam.iter().zip(&cand))
                .map(|(&g, (&l, &c))| g * (l - c))
                .sum();
            if dec <= 0.0 {
                break;
            }
            let cand_cols = columns(&cand);
            let fc = objective(&cand_cols);
            if fc <= f - 1e-4 * dec {
                lam = cand;
                cols = cand_cols;
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if f < -1e15 {
            return Ok(MarketSupport {
                value: NegInf,
                status: SupportStatus::Unbounded { ray: None },
            });
        }
    }

    let value = f - report.objective;
    // Boundary capital in direction w: the componentwise entropic value
    // shifted by the optimal index.
    let z: Vec<f64> = (0..d)
        .map(|i| {
            log_exp_moment(&space, &cols[i], betas[i]) / betas[i] + report.r[i].ln() / betas[i]
        })
        .collect();
    let plan = {
        let mut trades = Vec::with_capacity(tree.num_nodes());
        for idx in 0..tree.num_nodes() {
            let off = lam_off[idx];
            let mut u = vec![0.0; d];
            for (t, g) in model.cone(idx).generators().iter().enumerate() {
                let l = lam[off + t];
                for (i, v) in u.iter_mut().enumerate() {
                    *v += l * g[i];
                }
            }
            trades.push(u);
        }
        TradePlan { trades }
    };
    Ok(MarketSupport {
        value: Finite(value),
        status: SupportStatus::Attained { z, plan },
    })
}

/// Whether the zero capital vector is in the market-minimized region: some
/// admissible plan liquidates `y` into a position the regulator accepts.
pub fn market_acceptance_check(
    y: &RandomVector,
    reg: &Regulator,
    model: &MarketModel,
    cfg: &NumericConfig,
) -> Result<bool> {
    match classify_losses(&reg.losses)? {
        LossClass::PiecewiseLinear => {
            let layout = assemble_trade_lp(y, reg, model, false)?;
            Ok(layout.lp.solve(cfg.lp_tol)?.is_feasible())
        }
        LossClass::Exponential(betas) => {
            entropic_acceptance_check(y, &betas, reg, model, cfg)
        }
    }
}

/// Exponential-loss acceptance: minimize the worst threshold violation
/// `max_j (off_j - a_j'(x0 - E[loss]))` by projected subgradient descent.
fn entropic_acceptance_check(
    y: &RandomVector,
    betas: &[f64],
    reg: &Regulator,
    model: &MarketModel,
    cfg: &NumericConfig,
) -> Result<bool> {
    let d = model.d();
    if reg.m() != d {
        return Err(Error::precondition(
            "exponential losses require full liquidation (as many eligible assets as traded ones)",
        ));
    }
    if !model.is_unconstrained() {
        return Err(Error::precondition(
            "exponential losses require a model without per-node constraint sets",
        ));
    }
    if y.dim() != d {
        return Err(Error::dimension("position dimension differs from the asset count"));
    }
    let tree = model.tree();
    if !same_space(y.space(), tree.space()) {
        return Err(Error::dimension("position lives on a different space than the tree"));
    }
    let space = tree.space().clone();
    let n_atoms = space.len();
    let halfspaces = reg.thresh.comparison_set().halfspaces().to_vec();
    let x0 = reg.thresh.x0().to_vec();

    let mut lam_off = Vec::with_capacity(tree.num_nodes());
    let mut cursor = 0usize;
    for idx in 0..tree.num_nodes() {
        lam_off.push(cursor);
        cursor += model.cone(idx).generators().len();
    }
    let n_lam = cursor;
    let paths: Vec<Vec<usize>> = (0..n_atoms).map(|k| tree.path_to_atom(k)).collect();

    let position_cols = |lam: &[f64]| -> Vec<Vec<f64>> {
        let mut trades: Vec<Vec<f64>> = Vec::with_capacity(tree.num_nodes());
        for idx in 0..tree.num_nodes() {
            let off = lam_off[idx];
            let mut u = vec![0.0; d];
            for (t, g) in model.cone(idx).generators().iter().enumerate() {
                let l = lam[off + t];
                for (i, v) in u.iter_mut().enumerate() {
                    *v += l * g[i];
                }
            }
            trades.push(u);
        }
        let mut cols = vec![vec![0.0; n_atoms]; d];
        for k in 0..n_atoms {
            for (i, col) in cols.iter_mut().enumerate() {
                let mut v = y.value(k, i);
                for &n in &paths[k] {
                    v -= trades[n][i];
                }
                col[k] = v;
            }
        }
        cols
    };
    // Worst violation across the comparison halfspaces, and the index of
    // the active one. Expected losses are (M_i - 1) / b_i.
    let violation = |cols: &[Vec<f64>]| -> (f64, usize) {
        let eloss: Vec<f64> = (0..d)
            .map(|i| ((log_exp_moment(&space, &cols[i], betas[i])).exp() - 1.0) / betas[i])
            .collect();
        let mut worst = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for (j, h) in halfspaces.iter().enumerate() {
            let a = h.normal();
            let v = h.offset() - dot(a, &x0) + dot(a, &eloss);
            if v > worst {
                worst = v;
                arg = j;
            }
        }
        (worst, arg)
    };

    let mut lam = vec![0.0; n_lam];
    let mut cols = position_cols(&lam);
    let (mut best, mut active) = violation(&cols);
    let mut cur = best;
    for it in 0..cfg.subgrad_iters {
        if best <= -1e-9 {
            break;
        }
        // Subgradient of the active piece: a_j' dE[loss]/dlam.
        let a = halfspaces[active].normal().to_vec();
        let mut grad = vec![0.0; n_lam];
        for i in 0..d {
            if a[i] == 0.0 {
                continue;
            }
            let tilted: Vec<f64> = (0..n_atoms)
                .map(|k| space.prob(k) * (-betas[i] * cols[i][k]).exp())
                .collect();
            for idx in 0..tree.num_nodes() {
                let (lo, hi) = tree.node(idx).leaf_range;
                let mass: f64 = tilted[lo..hi].iter().sum();
                let off = lam_off[idx];
                for (t, g) in model.cone(idx).generators().iter().enumerate() {
                    grad[off + t] += a[i] * mass * g[i];
                }
            }
        }
        let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gn <= 1e-14 {
            break;
        }
        let step = 1.0 / ((1.0 + it as f64).sqrt() * gn);
        for (l, g) in lam.iter_mut().zip(&grad) {
            *l = (*l - step * g).max(0.0);
        }
        cols = position_cols(&lam);
        let (v, j) = violation(&cols);
        cur = v;
        active = j;
        if cur < best {
            best = cur;
        }
        if !cur.is_finite() {
            // Overshot into overflow; restart from the best-known region
            // with the remaining budget by shrinking toward zero.
            for l in lam.iter_mut() {
                *l *= 0.5;
            }
            cols = position_cols(&lam);
            let (v, j) = violation(&cols);
            cur = v;
            active = j;
        }
    }
    let _ = cur;
    Ok(best <= 1e-7)
}

/// Whether `diag(w) E[dQ/dP | node]` lies in the dual of the node cone at
/// every node: the pair prices every admissible exchange consistently.
pub fn wcone_membership(model: &MarketModel, q: &VectorMeasure, w: &[f64]) -> Result<bool> {
    let d = model.d();
    if q.dim() != d {
        return Err(Error::dimension("measure dimension differs from the asset count"));
    }
    if !same_space(q.space(), model.tree().space()) {
        return Err(Error::dimension("measure lives on a different space than the tree"));
    }
    if w.len() != d {
        return Err(Error::dimension("weight length differs from the asset count"));
    }
    check_direction(w, "weight")?;
    for idx in 0..model.tree().num_nodes() {
        let cond = model.tree().node_conditional_expect(q, idx)?;
        let v: Vec<f64> = w.iter().zip(&cond).map(|(wi, ci)| wi * ci).collect();
        for g in model.cone(idx).unit_generators() {
            if dot(&g, &v) < -1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Penalty of the market-minimized risk at a dual pair `(Q, w)`: the whole
/// space off the consistent set, otherwise the regulator penalty at the
/// truncated pair. Requires an unconstrained model.
pub fn market_penalty(
    model: &MarketModel,
    reg: &Regulator,
    q: &VectorMeasure,
    w: &[f64],
    cfg: &NumericConfig,
) -> Result<PenaltyValue> {
    if !model.is_unconstrained() {
        return Err(Error::precondition(
            "the penalty reduction needs a model without per-node constraint sets",
        ));
    }
    let d = model.d();
    let m = reg.m();
    if w.len() != d {
        return Err(Error::dimension("weight length differs from the asset count"));
    }
    check_direction(&w[..m], "weight on the eligible assets")?;
    if w[m..].iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::precondition(
            "weight must be componentwise nonnegative and finite",
        ));
    }
    if !wcone_membership(model, q, w)? {
        return Ok(PenaltyValue::AllSpace);
    }
    let bq = q.truncate(m)?;
    penalty_shortfall_set(&reg.losses, &reg.thresh, &bq, &w[..m], cfg)
}

/// Result of the scalarization-finiteness test.
#[derive(Debug, Clone)]
pub struct FinitenessReport {
    /// A nonzero nonnegative weight supporting every node cone, when one
    /// exists: all cones fit in the halfspace `{y : w'y >= 0}`.
    pub common_weight: Option<Vec<f64>>,
    /// `inf { (w o r)'x : x in the comparison set }` at that weight.
    pub cone_support: Option<XReal>,
    /// True when the weight exists and the lower bound above is finite, so
    /// no scalarization can run off to `-inf`.
    pub condition_holds: bool,
}

/// Looks for one weight `w >= 0`, `w != 0`, with `w'g >= 0` for every cone
/// generator at every node, then checks that the comparison set scaled by
/// the index `r` stays bounded below in that direction.
pub fn finiteness_check(
    model: &MarketModel,
    r: &[f64],
    thresh: &ThresholdData,
    cfg: &NumericConfig,
) -> Result<FinitenessReport> {
    let d = model.d();
    if thresh.dim() != d {
        return Err(Error::precondition(
            "the finiteness test covers full liquidation: threshold and market dimensions must match",
        ));
    }
    if r.len() != d {
        return Err(Error::dimension("index length differs from the asset count"));
    }
    if r.iter().any(|&ri| !(ri > 0.0) || !ri.is_finite()) {
        return Err(Error::precondition("index entries must be strictly positive and finite"));
    }
    let mut lp = LinearProgram::new(d);
    for idx in 0..model.tree().num_nodes() {
        for g in model.cone(idx).unit_generators() {
            lp.add_row(&g, Relation::Ge, 0.0);
        }
    }
    lp.add_row(&vec![1.0; d], Relation::Eq, 1.0);
    let w_bar = match lp.solve(cfg.lp_tol)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Ok(FinitenessReport {
                common_weight: None,
                cone_support: None,
                condition_holds: false,
            })
        }
        LpOutcome::Unbounded { .. } => unreachable!("zero objective cannot be unbounded"),
    };
    let wr: Vec<f64> = w_bar.iter().zip(r).map(|(wi, ri)| wi * ri).collect();
    let support = thresh.comparison_set().support_lower(&wr, cfg.lp_tol)?;
    let holds = !support.is_neg_inf();
    Ok(FinitenessReport {
        common_weight: Some(w_bar),
        cone_support: Some(support),
        condition_holds: holds,
    })
}
