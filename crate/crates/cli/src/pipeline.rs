//! Build the graded complex for a configuration, run the requested checks
//! and collect everything into a JSON-serialisable [`Report`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use hodge_dn::bvp::{hmf_decompose, HarmonicDims, HarmonicSpaces};
use hodge_dn::dec::{assemble, OperatorBundle};
use hodge_dn::dn::{self, DNMap, DnIdentities, KernelRange, RecoveryReport};
use hodge_dn::mesh::{generate, load_off, write_off, SimplicialComplex};
use hodge_dn::topology::{self, CupCheck, EquivariantReport, FiveTerm, GradedBetti, KernelBound};
use hodge_dn::witten::{product_base, GradedComplex, Grading, VectorFieldSpec};
use hodge_dn::{Error, Result, Tolerances};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Check, RunConfig, Source};

const GREEN_TRIALS: usize = 100;
const DN_TRIALS: usize = 8;
const CUP_TRIALS: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub source: Source,
    pub field: VectorFieldSpec,
    pub grading: Grading,
    pub checks: Vec<Check>,
    pub seed: u64,
    pub rng: &'static str,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshInfo {
    /// The mesh the operators live on; for the rotation backend this is `B`.
    pub role: &'static str,
    pub dim: usize,
    pub counts: Vec<usize>,
    pub boundary_counts: Vec<usize>,
    pub euler_characteristic: i64,
    pub mesh_size: f64,
    pub grade_dims: Vec<usize>,
    pub grade_labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentitiesReport {
    pub d_squared_max: f64,
    pub green_residual: f64,
    pub green_trials: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicReport {
    pub dims: HarmonicDims,
    /// Smallest principal angle between `𝓗_N` and `𝓗_D`, per grade.
    pub separation: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinedRow {
    #[serde(flatten)]
    pub counts: FiveTerm,
    pub resum_residual: f64,
    pub orthogonality_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DnBlockInfo {
    pub grade: String,
    pub dim: usize,
    pub rank: usize,
    pub rank_dual: usize,
    pub asymmetry: f64,
    pub flux_residual: f64,
    pub strong_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DnReport {
    pub blocks: Vec<DnBlockInfo>,
    pub identities: Vec<DnIdentities>,
    pub kernel_range: Vec<KernelRange>,
    pub kernel_bound: Vec<KernelBound>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub problems: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub config: ConfigEcho,
    pub mesh: MeshInfo,
    pub oracle_betti: GradedBetti,
    pub identities: Option<IdentitiesReport>,
    pub harmonic: Option<HarmonicReport>,
    pub refined_decomposition: BTreeMap<String, RefinedRow>,
    pub dn: Option<DnReport>,
    #[serde(rename = "rank_R")]
    pub rank_r: BTreeMap<String, usize>,
    #[serde(rename = "rank_R_dual")]
    pub rank_r_dual: BTreeMap<String, usize>,
    pub recovery: Vec<RecoveryReport>,
    pub node_labels: Vec<String>,
    pub node_dims: Vec<usize>,
    pub node_oracle_dims: Vec<usize>,
    pub exactness_angles: Vec<f64>,
    pub commutativity_residuals: Vec<f64>,
    pub cup_residuals: Vec<f64>,
    pub cup: Vec<CupCheck>,
    pub equivariant: Option<EquivariantReport>,
    pub checks: BTreeMap<String, CheckOutcome>,
}

impl Report {
    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|(_, o)| !o.passed).map(|(n, _)| n.clone()).collect()
    }
}

/// Everything built for one run.
pub struct Session {
    pub cfg: RunConfig,
    /// Operators of the mesh (of `B` for the rotation backend).
    pub bundle: Arc<OperatorBundle>,
    pub complex: GradedComplex,
    h: OnceLock<std::result::Result<HarmonicSpaces, String>>,
    hb: OnceLock<std::result::Result<HarmonicSpaces, String>>,
    dn: OnceLock<std::result::Result<DNMap, String>>,
}

fn load_mesh(cfg: &RunConfig) -> Result<SimplicialComplex> {
    match (&cfg.source, cfg.is_rotation()) {
        (Source::Generated { shape, res }, false) => generate(*shape, *res),
        (Source::Generated { shape, res }, true) => product_base(*shape, *res),
        (Source::Off { .. }, true) => Err(Error::BackendMismatch(
            "the rotation field needs the B × S¹ product backend; use --shape annulus|square|solid_torus".into(),
        )),
        (Source::Off { path }, false) => load_off(path),
    }
}

impl Session {
    /// Build mesh, operators and graded complex. Errors here are
    /// configuration errors.
    pub fn build(cfg: RunConfig) -> Result<Self> {
        let mesh = load_mesh(&cfg)?;
        let checks = cfg.effective_checks();
        if let Some(c) = checks.iter().find(|c| c.needs_boundary()) {
            if !mesh.has_boundary() {
                return Err(Error::Config(format!("check `{c}` needs a manifold with nonempty boundary")));
            }
        }
        if checks.contains(&Check::Equivariant) && !cfg.is_rotation() {
            return Err(Error::BackendMismatch("the equivariant check needs a rotation field on a product shape".into()));
        }
        let bundle = Arc::new(assemble(&mesh)?);
        let complex = match cfg.field {
            VectorFieldSpec::Zero => GradedComplex::zero(bundle.clone(), cfg.effective_grading())?,
            field => {
                if cfg.effective_grading() != Grading::Parity {
                    return Err(Error::Config("the rotation backend is parity graded; drop --grading degree".into()));
                }
                GradedComplex::product(bundle.clone(), field)?
            }
        };
        Ok(Session { cfg, bundle, complex, h: OnceLock::new(), hb: OnceLock::new(), dn: OnceLock::new() })
    }

    pub fn harmonic(&self) -> std::result::Result<&HarmonicSpaces, String> {
        self.h.get_or_init(|| HarmonicSpaces::compute(&self.complex, &self.cfg.tolerances).map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
    }

    pub fn boundary_harmonic(&self) -> std::result::Result<&HarmonicSpaces, String> {
        self.hb
            .get_or_init(|| {
                let b = self.complex.boundary.as_deref().ok_or_else(|| "no boundary".to_string())?;
                HarmonicSpaces::compute(b, &self.cfg.tolerances).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn dn_map(&self) -> std::result::Result<&DNMap, String> {
        self.dn
            .get_or_init(|| {
                let h = self.harmonic()?;
                DNMap::assemble(&self.complex, h, &self.cfg.tolerances).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Write the mesh (OFF), the graded `d_X` and mass matrices, and the DN
    /// blocks if they were assembled (MatrixMarket + JSON metadata).
    pub fn export(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let c = &self.complex;
        let mut written = vec![];
        let off = dir.join("mesh.off");
        write_off(self.bundle.complex(), &off)?;
        written.push(off);
        for g in 0..c.num_grades() {
            let d = dir.join(format!("d_grade{g}.mtx"));
            dn::write_sparse_matrix_market(c.witten_d(g), &d)?;
            let m = dir.join(format!("mass_grade{g}.mtx"));
            dn::write_sparse_matrix_market(c.mass(g), &m)?;
            written.extend([d, m]);
        }
        let meta = serde_json::json!({
            "config": self.cfg,
            "grading": c.grading,
            "grade_labels": (0..c.num_grades()).map(|g| c.label(g).to_string()).collect::<Vec<_>>(),
            "mesh_role": if self.cfg.is_rotation() { "product base B" } else { "manifold" },
        });
        let mpath = dir.join("operators.json");
        std::fs::write(&mpath, serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(std::io::Error::other(e)))?)?;
        written.push(mpath);
        if let Some(Ok(dn)) = self.dn.get() {
            written.extend(dn.export(dir, "dn", &meta)?);
        }
        Ok(written)
    }
}

fn outcome(problems: Vec<String>) -> CheckOutcome {
    CheckOutcome { passed: problems.is_empty(), problems }
}

/// Run a configuration. `Err` means a configuration error (exit code 2);
/// check failures are recorded in the report.
pub fn execute(cfg: RunConfig) -> Result<(Report, Session)> {
    let session = Session::build(cfg)?;
    let report = run_checks(&session);
    Ok((report, session))
}

pub fn run_checks(s: &Session) -> Report {
    let cfg = &s.cfg;
    let c = &s.complex;
    let tol = &cfg.tolerances;
    let checks = cfg.effective_checks();
    let oracle = topology::oracle(c);
    let k = s.bundle.complex();
    let mut report = Report {
        config: ConfigEcho {
            source: cfg.source.clone(),
            field: cfg.field,
            grading: c.grading,
            checks: checks.clone(),
            seed: cfg.seed,
            rng: "ChaCha8",
            tolerances: tol.clone(),
        },
        mesh: MeshInfo {
            role: if cfg.is_rotation() { "product_base" } else { "manifold" },
            dim: k.dim(),
            counts: k.counts(),
            boundary_counts: k.boundary().map(|b| b.complex.counts()).unwrap_or_default(),
            euler_characteristic: k.euler_characteristic(),
            mesh_size: s.bundle.mesh_size(),
            grade_dims: c.dims(),
            grade_labels: (0..c.num_grades()).map(|g| c.label(g).to_string()).collect(),
        },
        oracle_betti: oracle.clone(),
        identities: None,
        harmonic: None,
        refined_decomposition: BTreeMap::new(),
        dn: None,
        rank_r: BTreeMap::new(),
        rank_r_dual: BTreeMap::new(),
        recovery: vec![],
        node_labels: vec![],
        node_dims: vec![],
        node_oracle_dims: vec![],
        exactness_angles: vec![],
        commutativity_residuals: vec![],
        cup_residuals: vec![],
        cup: vec![],
        equivariant: None,
        checks: BTreeMap::new(),
    };
    for check in checks {
        let problems = match check {
            Check::Identities => identities(s, &mut report),
            Check::Harmonic => harmonic(s, &oracle, &mut report),
            Check::Dn => dn_check(s, &mut report),
            Check::Recovery => recovery(s, &oracle, &mut report),
            Check::Sequence => sequence(s, &mut report),
            Check::Cup => cup(s, &mut report),
            Check::Equivariant => equivariant(s, &mut report),
        };
        report.checks.insert(check.name().to_string(), outcome(problems));
    }
    report
}

fn identities(s: &Session, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let rep = IdentitiesReport {
        d_squared_max: c.d_squared_max(),
        green_residual: c.green_residual(GREEN_TRIALS, s.cfg.seed),
        green_trials: GREEN_TRIALS,
    };
    let mut p = vec![];
    if rep.d_squared_max != 0.0 {
        p.push(format!("d∘d has entry {:.3e}", rep.d_squared_max));
    }
    if !(rep.green_residual <= s.cfg.tolerances.green) {
        p.push(format!("Green residual {:.3e} > {:.1e}", rep.green_residual, s.cfg.tolerances.green));
    }
    r.identities = Some(rep);
    p
}

fn harmonic(s: &Session, oracle: &GradedBetti, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let tol = &s.cfg.tolerances;
    let h = match s.harmonic() {
        Ok(h) => h,
        Err(e) => return vec![e],
    };
    let dims = h.dims();
    let separation: Vec<f64> = (0..c.num_grades()).map(|g| h.separation(g)).collect();
    let mut p = vec![];
    if dims.neumann != oracle.absolute {
        p.push(format!("dim 𝓗_N = {:?}, oracle {:?}", dims.neumann, oracle.absolute));
    }
    if dims.dirichlet != oracle.relative {
        p.push(format!("dim 𝓗_D = {:?}, oracle {:?}", dims.dirichlet, oracle.relative));
    }
    // with ∂M = ∅ the two spaces coincide; the separation is meaningless
    for (g, &a) in separation.iter().enumerate().filter(|_| c.has_boundary()) {
        if !(a >= tol.theta_min) {
            p.push(format!("grade {}: 𝓗_N/𝓗_D separation {a:.3e} < {:.1e}", c.label(g), tol.theta_min));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.cfg.seed ^ 0x5eed_0001);
    for row in topology::five_term(c, h) {
        let g = (0..c.num_grades()).find(|&g| c.label(g) == row.grade).expect("five_term grade label");
        if !row.holds {
            p.push(format!("grade {}: five-term dimension count fails", row.grade));
        }
        let omega = DVector::from_fn(c.grades[g].dim, |_, _| rng.random_range(-1.0..1.0));
        let (resum, orth) = match hmf_decompose(c, h, g, &omega, tol) {
            Ok(d) => (d.resum_residual, d.orthogonality_residual),
            Err(e) => {
                p.push(format!("grade {}: decomposition failed: {e}", row.grade));
                (f64::NAN, f64::NAN)
            }
        };
        if !(resum <= tol.decomp && orth <= tol.decomp) {
            p.push(format!("grade {}: decomposition residuals {resum:.3e}/{orth:.3e} > {:.1e}", row.grade, tol.decomp));
        }
        r.refined_decomposition.insert(row.grade.clone(), RefinedRow { counts: row, resum_residual: resum, orthogonality_residual: orth });
    }
    r.harmonic = Some(HarmonicReport { dims, separation });
    p
}

fn dn_check(s: &Session, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let tol = &s.cfg.tolerances;
    let (h, hb, dnm) = match (s.harmonic(), s.boundary_harmonic(), s.dn_map()) {
        (Ok(h), Ok(hb), Ok(d)) => (h, hb, d),
        (a, b, d) => return [a.err(), b.err(), d.err()].into_iter().flatten().collect(),
    };
    let mut p = vec![];
    let blocks: Vec<DnBlockInfo> = dnm
        .blocks
        .iter()
        .map(|b| DnBlockInfo {
            grade: b.label.clone(),
            dim: b.s.nrows(),
            rank: b.rank,
            rank_dual: b.rank_dual,
            asymmetry: b.asymmetry,
            flux_residual: b.flux_residual,
            strong_residual: b.strong_residual,
        })
        .collect();
    for b in &blocks {
        if !(b.asymmetry <= tol.dn && b.flux_residual <= tol.dn) {
            p.push(format!("grade {}: asymmetry {:.3e}, flux residual {:.3e}", b.grade, b.asymmetry, b.flux_residual));
        }
    }
    let mut ids = vec![];
    let mut kr = vec![];
    for b in &dnm.blocks {
        let id = dn::dn_identities(c, dnm, b.grade, DN_TRIALS, s.cfg.seed);
        for (name, v) in [("Λ²", id.lambda_squared), ("Λd", id.lambda_d), ("dΛ", id.d_lambda)] {
            if !(v <= tol.dn) {
                p.push(format!("grade {}: {name} residual {v:.3e} > {:.1e}", id.grade, tol.dn));
            }
        }
        if !(id.min_quadratic >= -tol.dn) {
            p.push(format!("grade {}: ∫θ∧Λθ = {:.3e} < 0", id.grade, id.min_quadratic));
        }
        if !(id.energy_residual <= tol.dn) {
            p.push(format!("grade {}: energy identity residual {:.3e}", id.grade, id.energy_residual));
        }
        ids.push(id);
        match dn::kernel_range_analysis(c, h, dnm, b.grade, tol) {
            Ok(k) => {
                if !(k.kernel_range_angle <= tol.theta && k.kernel_trace_angle <= tol.theta) {
                    p.push(format!(
                        "grade {}: ker Λ vs ran angles {:.3e}/{:.3e} > {:.1e}",
                        k.grade, k.kernel_range_angle, k.kernel_trace_angle, tol.theta
                    ));
                }
                kr.push(k);
            }
            Err(e) => p.push(format!("grade {}: kernel/range analysis failed: {e}", b.label)),
        }
    }
    let kb = match topology::kernel_bound(c, h, hb, dnm, tol) {
        Ok(v) => v,
        Err(e) => {
            p.push(format!("kernel bound failed: {e}"));
            vec![]
        }
    };
    for k in kb.iter().filter(|k| !k.holds) {
        p.push(format!(
            "grade {}: dim ker Λ/𝓔 = {} exceeds min({}, {})",
            k.grade, k.quotient_dim, k.boundary_cohomology, k.interior_cohomology
        ));
    }
    r.dn = Some(DnReport { blocks, identities: ids, kernel_range: kr, kernel_bound: kb });
    p
}

fn recovery(s: &Session, oracle: &GradedBetti, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let tol = &s.cfg.tolerances;
    let (h, dnm) = match (s.harmonic(), s.dn_map()) {
        (Ok(h), Ok(d)) => (h, d),
        (a, d) => return [a.err(), d.err()].into_iter().flatten().collect(),
    };
    let mut p = vec![];
    for b in &dnm.blocks {
        let g = b.grade;
        match dn::recovery_operator(c, h, dnm, g, tol) {
            Ok(rep) => {
                let next_rel = c.next(g).map(|q| oracle.relative[q]).unwrap_or(0);
                if rep.rank != rep.expected_rank || rep.rank != next_rel {
                    p.push(format!(
                        "grade {}: rank R = {}, dim 𝓗_D(next) = {}, oracle {next_rel}",
                        rep.grade, rep.rank, rep.expected_rank
                    ));
                }
                if rep.rank_dual != rep.expected_rank_dual || rep.rank_dual != oracle.absolute[g] {
                    p.push(format!(
                        "grade {}: rank R* = {}, dim 𝓗_N = {}, oracle {}",
                        rep.grade, rep.rank_dual, rep.expected_rank_dual, oracle.absolute[g]
                    ));
                }
                if !(rep.range_angle <= tol.theta && rep.range_dual_angle <= tol.theta) {
                    p.push(format!("grade {}: range angles {:.3e}/{:.3e}", rep.grade, rep.range_angle, rep.range_dual_angle));
                }
                r.rank_r.insert(rep.grade.clone(), rep.rank);
                r.rank_r_dual.insert(rep.grade.clone(), rep.rank_dual);
                r.recovery.push(rep);
            }
            Err(e) => p.push(format!("grade {}: {e}", b.label)),
        }
    }
    p
}

fn sequence(s: &Session, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let tol = &s.cfg.tolerances;
    let (h, hb, dnm) = match (s.harmonic(), s.boundary_harmonic(), s.dn_map()) {
        (Ok(h), Ok(hb), Ok(d)) => (h, hb, d),
        (a, b, d) => return [a.err(), b.err(), d.err()].into_iter().flatten().collect(),
    };
    let seq = match topology::check_exact_sequence(c, h, hb, dnm, tol) {
        Ok(q) => q,
        Err(e) => return vec![e.to_string()],
    };
    let mut p = vec![];
    if let Err(e) = seq.verify(tol) {
        p.push(e.to_string());
    }
    if !seq.dims_match_oracle() {
        p.push(format!("node dims {:?} differ from oracle", seq.node_dims()));
    }
    let mc = seq.max_commutativity();
    if !(mc <= tol.seq) {
        p.push(format!("commutativity residual {mc:.3e} > {:.1e}", tol.seq));
    }
    r.node_labels = seq.nodes.iter().map(|n| n.label.clone()).collect();
    r.node_dims = seq.node_dims();
    r.node_oracle_dims = seq.nodes.iter().map(|n| n.oracle_dim).collect();
    r.exactness_angles = seq.exactness_angles();
    r.commutativity_residuals = seq.commutativity_residuals();
    p
}

fn cup(s: &Session, r: &mut Report) -> Vec<String> {
    let c = &s.complex;
    let tol = &s.cfg.tolerances;
    let (h, dnm) = match (s.harmonic(), s.dn_map()) {
        (Ok(h), Ok(d)) => (h, d),
        (a, d) => return [a.err(), d.err()].into_iter().flatten().collect(),
    };
    match topology::check_cup_product(c, h, dnm, CUP_TRIALS, s.cfg.seed, tol) {
        // nothing to multiply: vacuously true
        Err(Error::EmptyBoundarySubspace) => vec![],
        Err(e) => vec![e.to_string()],
        Ok(checks) => {
            let worst = topology::max_cup_residual(&checks);
            r.cup_residuals = checks.iter().map(|k| k.residual).collect();
            r.cup = checks;
            if worst <= tol.cup {
                vec![]
            } else {
                vec![format!("cup residual {worst:.3e} > {:.1e}", tol.cup)]
            }
        }
    }
}

fn equivariant(s: &Session, r: &mut Report) -> Vec<String> {
    match topology::equivariant_report(s.bundle.clone(), s.cfg.field, &s.cfg.tolerances) {
        Ok(rep) => {
            let p = rep
                .rows
                .iter()
                .filter(|row| !row.holds)
                .map(|row| format!("{} grade {}: rank R = {}, expected {}", row.field, row.grade, row.rank_r, row.expected))
                .collect();
            r.equivariant = Some(rep);
            p
        }
        Err(e) => vec![e.to_string()],
    }
}

/// Configuration errors map to exit code 2.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::NotManifold(_)
            | Error::NotOrientable
            | Error::ResolutionTooSmall { .. }
            | Error::DegenerateSimplex { .. }
            | Error::BackendMismatch(_)
            | Error::Config(_)
            | Error::Io(_)
    )
}
