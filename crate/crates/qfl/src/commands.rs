//! One function per scenario command.

use qfl_core::fields::{
    coherent_gaussian_field, empirical_characteristic_function, gns_factor, levy_law, Family, FieldLaw,
};
use qfl_core::fock::{matrix_element, oracle_trajectory, FockRep, SparseOp, DEFAULT_STEPS_PER_UNIT};
use qfl_core::ito::{
    flow_generator, flow_generator_ito, hp_coefficients, poisson_table, quadrature_table, quadrature_table_holds,
    unitarity_check, ClassicalTable,
};
use qfl_core::synthesis::decompose;
use qfl_core::{Complex64, ComplexMatrix, ComplexVector, GaussianState, RealMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::dto::{
    complex_matrix, complex_matrix_dto, complex_vector, complex_vector_dto, cx, real_matrix_dto, Cx, DilationDto,
    GaussianStateDto, KernelDto, PairDto,
};
use crate::error::{invalid, CliResult};
use crate::output::Table;
use crate::{Command, Outcome, Resolved};

pub fn dispatch(command: Command, input: &Value, s: &Resolved) -> CliResult<Outcome> {
    match command {
        Command::ValidateState => validate_state(parse(input)?, s),
        Command::Evolve => evolve(parse(input)?, s),
        Command::Weyl => weyl(parse(input)?, s),
        Command::Decompose => decompose_pair(parse(input)?, s),
        Command::Dilate => dilate(parse(input)?, s),
        Command::VerifyOracle => verify_oracle(parse(input)?, s),
        Command::ItoTable => ito_table(parse(input)?, s),
        Command::Unitarity => unitarity(parse(input)?, s),
        Command::SampleField => sample_field(parse(input)?, s),
    }
}

fn parse<T: DeserializeOwned>(input: &Value) -> CliResult<T> {
    Ok(serde_json::from_value(input.clone())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    start: f64,
    stop: f64,
    count: usize,
}

/// Either an explicit list or an evenly spaced grid.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Times {
    #[serde(default)]
    times: Option<Vec<f64>>,
    #[serde(default)]
    grid: Option<Grid>,
}

impl Times {
    fn resolve(&self) -> CliResult<Vec<f64>> {
        let times = match (&self.times, &self.grid) {
            (Some(t), None) => t.clone(),
            (None, Some(g)) => {
                if g.count == 0 {
                    return Err(invalid("grid count must be positive"));
                }
                if g.count == 1 {
                    vec![g.start]
                } else {
                    let h = (g.stop - g.start) / (g.count - 1) as f64;
                    (0..g.count).map(|i| g.start + h * i as f64).collect()
                }
            }
            _ => return Err(invalid("give exactly one of \"times\" and \"grid\"")),
        };
        if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(invalid("times must be a nonempty list of finite nonnegative numbers"));
        }
        Ok(times)
    }
}

fn state_json(st: &GaussianState) -> Value {
    json!(GaussianStateDto::from_state(st))
}

fn moment_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|j| format!("l{j}")));
    cols.extend((1..=n).map(|j| format!("m{j}")));
    for i in 1..=2 * n {
        cols.extend((1..=2 * n).map(|j| format!("S{i}_{j}")));
    }
    cols
}

fn moment_row(t: f64, st: &GaussianState) -> Vec<f64> {
    let mut row = vec![t];
    row.extend(st.momentum_mean().iter());
    row.extend(st.position_mean().iter());
    let s = st.covariance();
    for i in 0..s.nrows() {
        row.extend(s.row(i).iter());
    }
    row
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateInput {
    state: GaussianStateDto,
}

fn validate_state(input: ValidateInput, s: &Resolved) -> CliResult<Outcome> {
    let st = input.state.to_state()?;
    let v = st.validate(s.tolerances.psd)?;
    let mut out = Outcome::new(json!({
        "is_valid": v.is_valid,
        "min_eigenvalue": v.min_eigenvalue,
        "symmetry_defect": v.symmetry_defect,
    }));
    out.check_flag("2S + iJ positive semidefinite and S symmetric", v.is_valid);
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolveInput {
    state: GaussianStateDto,
    pair: PairDto,
    #[serde(flatten)]
    times: Times,
}

fn evolve(input: EvolveInput, s: &Resolved) -> CliResult<Outcome> {
    let st = input.state.to_state()?;
    let pair = input.pair.to_pair(s.tolerances.psd)?;
    let times = input.times.resolve()?;
    let mut table = Table::new(moment_columns(st.modes()));
    let mut worst = f64::INFINITY;
    let mut all_valid = true;
    let mut last = st.clone();
    for &t in &times {
        last = pair.evolve_state(&st, t)?;
        let v = last.validate(s.tolerances.psd)?;
        worst = worst.min(v.min_eigenvalue);
        all_valid &= v.is_valid;
        table.rows.push(moment_row(t, &last));
    }
    let mut out = Outcome::new(json!({
        "admissibility_min_eigenvalue": pair.admissibility().min_eigenvalue,
        "final_time": times[times.len() - 1],
        "final_state": state_json(&last),
        "min_eigenvalue_over_trajectory": worst,
    }));
    out.check_flag("every evolved state valid", all_valid);
    out.tables.push(("trajectory.csv".into(), table));
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeylInput {
    state: GaussianStateDto,
    points: Vec<Vec<Cx>>,
    #[serde(default)]
    pair: Option<PairDto>,
    #[serde(default)]
    t: Option<f64>,
}

fn weyl(input: WeylInput, s: &Resolved) -> CliResult<Outcome> {
    let st = input.state.to_state()?;
    st.validate(s.tolerances.psd)?;
    let pair = match (&input.pair, input.t) {
        (Some(p), Some(t)) => Some((p.to_pair(s.tolerances.psd)?, t)),
        (None, None) => None,
        _ => return Err(invalid("\"pair\" and \"t\" go together")),
    };
    let mut rows = Vec::new();
    let (mut modulus, mut symmetry, mut duality) = (0.0_f64, 0.0_f64, 0.0_f64);
    for p in &input.points {
        let z = complex_vector(p);
        let w = st.weyl_transform(&z)?;
        modulus = modulus.max(w.norm());
        symmetry = symmetry.max((st.weyl_transform(&-&z)? - w.conj()).norm());
        let mut row = json!({ "z": p, "transform": cx(w) });
        if let Some((pair, t)) = &pair {
            let action = pair.weyl_action(*t, &z)?;
            let evolved = pair.evolve_state(&st, *t)?.weyl_transform(&z)?;
            let dual = st.weyl_transform(&action.z_out)? * (-action.damping_exponent).exp();
            duality = duality.max((evolved - dual).norm());
            row["z_out"] = json!(complex_vector_dto(&action.z_out));
            row["damping_exponent"] = json!(action.damping_exponent);
            row["evolved_transform"] = json!(cx(evolved));
        }
        rows.push(row);
    }
    let mut out = Outcome::new(json!({ "points": rows }));
    out.check_le("max |transform| (at most one)", modulus, 1.0 + s.tolerances.duality);
    out.check_le("conjugate symmetry defect", symmetry, s.tolerances.duality);
    if pair.is_some() {
        out.check_le("duality defect between state and Weyl pictures", duality, s.tolerances.duality);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeInput {
    pair: PairDto,
}

fn decompose_pair(input: DecomposeInput, s: &Resolved) -> CliResult<Outcome> {
    let pair = input.pair.to_pair(s.tolerances.psd)?;
    let spec = decompose(pair.k(), pair.c(), s.tolerances.rank)?;
    let r = spec.residuals();
    let dilation = json!(DilationDto::from_spec(&spec));
    let report = spec.report();
    let couplings: Vec<Value> = report
        .couplings
        .iter()
        .map(|(u, v)| json!({ "u": complex_vector_dto(u), "v": complex_vector_dto(v) }))
        .collect();
    let mut out = Outcome::new(json!({
        "rank": spec.rank(),
        "couplings": couplings,
        "dilation": dilation,
        "residuals": {
            "K": r.k_residual,
            "C": r.c_residual,
            "Kprime_symplectic": r.symplectic_defect,
            "hamiltonian": r.hamiltonian_residual,
        },
    }));
    let tol = &s.tolerances;
    out.check_le("K reconstruction residual", r.k_residual, tol.reconstruction);
    out.check_le("C reconstruction residual", r.c_residual, tol.reconstruction);
    out.check_le("K' symplectic defect", r.symplectic_defect, tol.symplectic);
    out.check_le("Hamiltonian residual", r.hamiltonian_residual, tol.reconstruction);
    out.json_files.push(("dilation.json".into(), dilation));
    out.text = Some(report.to_string());
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DilateInput {
    dilation: DilationDto,
    #[serde(default = "default_probe_count")]
    probes: usize,
}

fn default_probe_count() -> usize {
    3
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let r = radius * rng.random::<f64>();
    let norm = v.norm().max(f64::MIN_POSITIVE);
    v * Complex64::new(r / norm, 0.0)
}

/// `⟨a|θ(X)|b⟩` for `θ(X) = i[H_S, X] − ½Σ(L†LX + XL†L − 2L†XL)` using only
/// sparse products against vectors.
fn lindbladian_element(
    h_s: &SparseOp,
    ls: &[SparseOp],
    x: &ComplexMatrix,
    a: &ComplexVector,
    b: &ComplexVector,
) -> Complex64 {
    let xb = x * b;
    let xd_a = x.adjoint() * a;
    let mut acc = Complex64::i() * (h_s.mul_vec(a).dotc(&xb) - xd_a.dotc(&h_s.mul_vec(b)));
    for l in ls {
        let la = l.mul_vec(a);
        let lb = l.mul_vec(b);
        let ldla = l.adjoint().mul_vec(&la);
        let ldlb = l.adjoint().mul_vec(&lb);
        acc -= (ldla.dotc(&xb) + xd_a.dotc(&ldlb) - la.dotc(&(x * &lb)) * 2.0) * 0.5;
    }
    acc
}

fn dilate(input: DilateInput, s: &Resolved) -> CliResult<Outcome> {
    let spec = input.dilation.to_spec()?;
    let pair = qfl_core::QuasifreePair::with_tolerance(spec.source_k.clone(), spec.source_c.clone(), s.tolerances.psd)?;
    let r = spec.residuals();
    let rep = FockRep::build(spec.n, s.cutoff)?;
    let h_s = rep.hamiltonian(&spec.hamiltonian_terms)?.scale(Complex64::new(-1.0, 0.0));
    let ls = spec.lindblad_terms.iter().map(|t| rep.lindblad_operator(t)).collect::<qfl_core::Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut worst = 0.0_f64;
    for _ in 0..input.probes {
        let z = random_vector(&mut rng, spec.n, 1.0);
        let a = rep.coherent_vector(&random_vector(&mut rng, spec.n, 0.5))?;
        let b = rep.coherent_vector(&random_vector(&mut rng, spec.n, 0.5))?;
        let w = rep.weyl_matrix(&z)?;
        let got = lindbladian_element(&h_s, &ls, &w, &a, &b);
        let want = matrix_element(&a, &rep.generator_matrix(&pair.generator_action(&z)?, &z)?, &b);
        worst = worst.max((got - want).norm());
    }
    let pair_json = json!(PairDto::from_matrices(pair.k(), pair.c()));
    let mut out = Outcome::new(json!({
        "pair": pair_json,
        "noise_dimension": spec.rank(),
        "admissibility_min_eigenvalue": pair.admissibility().min_eigenvalue,
        "generator_probe_max_difference": worst,
        "probes": input.probes,
        "residuals": {
            "Kprime_symplectic": r.symplectic_defect,
            "hamiltonian": r.hamiltonian_residual,
        },
    }));
    out.check_le("K' symplectic defect", r.symplectic_defect, s.tolerances.symplectic);
    out.check_le("Hamiltonian residual", r.hamiltonian_residual, s.tolerances.reconstruction);
    out.check_le("Fock generator vs quasifree generator", worst, s.tolerances.oracle);
    out.json_files.push(("pair.json".into(), pair_json));
    out.text = Some(spec.report().to_string());
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleInput {
    state: GaussianStateDto,
    pair: PairDto,
    #[serde(flatten)]
    times: Times,
    #[serde(default)]
    points: Vec<Vec<Cx>>,
    #[serde(default)]
    random_points: usize,
    #[serde(default)]
    steps_per_unit: Option<usize>,
}

fn verify_oracle(input: OracleInput, s: &Resolved) -> CliResult<Outcome> {
    let st = input.state.to_state()?;
    st.validate(s.tolerances.psd)?;
    let pair = input.pair.to_pair(s.tolerances.psd)?;
    let times = input.times.resolve()?;
    let n = st.modes();
    let mut points: Vec<ComplexVector> = input.points.iter().map(|p| complex_vector(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    points.extend((0..input.random_points).map(|_| random_vector(&mut rng, n, 1.0)));
    let steps = input.steps_per_unit.unwrap_or(DEFAULT_STEPS_PER_UNIT);
    let samples = oracle_trajectory(&st, &pair, &times, s.cutoff, steps, &points)?;
    let mut closed = Table::new(moment_columns(n));
    let mut fock = Table::new(moment_columns(n));
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    let mut leak = 0.0_f64;
    for sample in &samples {
        let r = sample.report;
        closed.rows.push(moment_row(r.t, &sample.closed_form));
        fock.rows.push(moment_row(r.t, &sample.oracle));
        worst = worst.max(r.max_error());
        leak = leak.max(r.leakage);
        rows.push(json!({
            "t": r.t,
            "mean_error": r.mean_error,
            "covariance_error": r.cov_error,
            "weyl_error": r.weyl_error,
            "leakage": r.leakage,
        }));
    }
    let mut out = Outcome::new(json!({
        "steps_per_unit": steps,
        "weyl_points": points.iter().map(complex_vector_dto).collect::<Vec<_>>(),
        "samples": rows,
        "max_error": worst,
        "max_leakage": leak,
    }));
    out.check_le("oracle vs closed form", worst, s.tolerances.oracle);
    out.check_le("top-level population", leak, qfl_core::fock::MAX_LEAKAGE);
    out.tables.push(("trajectory.csv".into(), closed));
    out.tables.push(("oracle_trajectory.csv".into(), fock));
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HpDto {
    #[serde(rename = "S")]
    s: Vec<Vec<Cx>>,
    #[serde(rename = "L")]
    l: Vec<Vec<Vec<Cx>>>,
    #[serde(rename = "H")]
    h: Vec<Vec<Cx>>,
}

impl HpDto {
    fn matrices(&self) -> CliResult<(ComplexMatrix, Vec<ComplexMatrix>, ComplexMatrix)> {
        let h = complex_matrix(&self.h, "H")?;
        let l = self.l.iter().map(|m| complex_matrix(m, "L")).collect::<CliResult<Vec<_>>>()?;
        let mut s = complex_matrix(&self.s, "S")?;
        if self.s.is_empty() && l.is_empty() {
            s = ComplexMatrix::zeros(0, 0);
        }
        Ok((s, l, h))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ItoInput {
    #[serde(default = "default_d")]
    d: usize,
    #[serde(default)]
    intensities: Option<Vec<f64>>,
    #[serde(default)]
    hp: Option<HpDto>,
    #[serde(default, rename = "X")]
    x: Option<Vec<Vec<Cx>>>,
}

fn default_d() -> usize {
    1
}

fn ito_table(input: ItoInput, s: &Resolved) -> CliResult<Outcome> {
    let d = input.d;
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let lambdas = input.intensities.clone().unwrap_or_else(|| vec![1.0; d]);
    if lambdas.len() != d {
        return Err(invalid(format!("need {d} intensities, got {}", lambdas.len())));
    }
    let table = quadrature_table(d)?;
    let quad_ok = quadrature_table_holds(d)?;
    let products: Vec<Vec<String>> = table.iter().map(|row| row.iter().map(|p| p.to_string()).collect()).collect();
    let mut poisson = 0.0_f64;
    for i in 1..=d {
        for j in 1..=d {
            poisson = poisson.max(poisson_table(i, j, lambdas[i - 1], lambdas[j - 1])?.defect());
        }
    }
    let brownian = ClassicalTable::brownian(d)?;
    let counting = ClassicalTable::poisson()?;
    let mut text = format!("Brownian table, d = {d}\n{brownian}\nPoisson table\n{counting}");
    let mut results = json!({
        "d": d,
        "quadrature_products": products,
        "brownian_table": { "labels": brownian.labels, "entries": brownian.entries },
        "poisson_table": { "labels": counting.labels, "entries": counting.entries },
        "poisson_product_defect": poisson,
    });
    let mut out_checks = Vec::new();
    out_checks.push(("dQ_i dQ_j = delta_ij dt", quad_ok));
    let mut theta_json = None;
    let mut numbers = Vec::new();
    if let Some(hp) = &input.hp {
        let (sm, l, h) = hp.matrices()?;
        let m = h.nrows();
        let x = match &input.x {
            Some(x) => complex_matrix(x, "X")?,
            None => ComplexMatrix::identity(m, m),
        };
        let theta = flow_generator(&sm, &l, &h, &x)?;
        let coeffs = hp_coefficients(&sm, &l, &h)?;
        let via_ito = flow_generator_ito(&coeffs, &x)?;
        let mut gap = 0.0_f64;
        for (row, row2) in theta.iter().zip(&via_ito) {
            for (a, b) in row.iter().zip(row2) {
                gap = gap.max((a - b).camax());
            }
        }
        let identity = flow_generator(&sm, &l, &h, &ComplexMatrix::identity(m, m))?;
        let theta_identity = identity[0][0].camax();
        let unit = unitarity_check(&coeffs, s.tolerances.unitarity);
        let grid: Vec<Vec<Value>> =
            theta.iter().map(|row| row.iter().map(|t| json!(complex_matrix_dto(t))).collect()).collect();
        let exported = json!({ "d": l.len(), "system_dim": m, "theta": grid });
        results["theta_file"] = json!("theta.json");
        results["theta_identity_max"] = json!(theta_identity);
        results["flow_generator_vs_ito_product"] = json!(gap);
        results["unitarity"] = json!({
            "isometry_defect": unit.isometry_defect,
            "coisometry_defect": unit.coisometry_defect,
        });
        text.push_str(&format!("theta^alpha_beta exported for d = {}, system dimension {m}\n", l.len()));
        numbers.push(("theta^0_0(I) = 0", theta_identity, s.tolerances.unitarity));
        numbers.push(("flow generator agrees with the Ito product rule", gap, 1e-10_f64.max(s.tolerances.unitarity)));
        numbers.push(("HP unitarity conditions", unit.isometry_defect.max(unit.coisometry_defect), s.tolerances.unitarity));
        theta_json = Some(exported);
    }
    let mut out = Outcome::new(results);
    for (name, ok) in out_checks {
        out.check_flag(name, ok);
    }
    out.check_le("dN_i dN_j = delta_ij dN_j", poisson, s.tolerances.unitarity);
    for (name, v, tol) in numbers {
        out.check_le(name, v, tol);
    }
    if let Some(t) = theta_json {
        out.json_files.push(("theta.json".into(), t));
    }
    out.text = Some(text);
    Ok(out)
}

fn unitarity(input: HpDto, s: &Resolved) -> CliResult<Outcome> {
    let (sm, l, h) = input.matrices()?;
    let coeffs = hp_coefficients(&sm, &l, &h)?;
    let report = unitarity_check(&coeffs, s.tolerances.unitarity);
    let d = coeffs.d();
    let grid: Vec<Vec<Value>> =
        (0..=d).map(|a| (0..=d).map(|b| json!(complex_matrix_dto(coeffs.get(a, b)))).collect()).collect();
    let mut out = Outcome::new(json!({
        "d": d,
        "system_dim": coeffs.system_dim(),
        "isometry_defect": report.isometry_defect,
        "coisometry_defect": report.coisometry_defect,
        "coefficients": grid,
    }));
    out.check_le("isometry condition", report.isometry_defect, s.tolerances.unitarity);
    out.check_le("co-isometry condition", report.coisometry_defect, s.tolerances.unitarity);
    Ok(out)
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum FamilyDto {
    P,
    Q,
}

impl From<FamilyDto> for Family {
    fn from(f: FamilyDto) -> Self {
        match f {
            FamilyDto::P => Family::P,
            FamilyDto::Q => Family::Q,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldDto {
    u0: Vec<Cx>,
    vectors: Vec<Vec<Cx>>,
    #[serde(default = "default_family")]
    family: FamilyDto,
}

fn default_family() -> FamilyDto {
    FamilyDto::Q
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevyDto {
    #[serde(rename = "H")]
    h: Vec<Vec<Cx>>,
    u: Vec<Cx>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleInput {
    count: usize,
    #[serde(default)]
    kernel: Option<KernelDto>,
    /// `u₀ = Σ cⱼ λ(αⱼ)` for a kernel field; vacuum when absent
    #[serde(default)]
    coefficients: Option<Vec<Cx>>,
    #[serde(default = "default_family")]
    family: FamilyDto,
    #[serde(default)]
    field: Option<FieldDto>,
    #[serde(default)]
    levy: Option<LevyDto>,
}

fn law_json(law: &FieldLaw) -> Value {
    json!({
        "mean": law.mean.iter().copied().collect::<Vec<_>>(),
        "covariance": real_matrix_dto(&law.covariance),
    })
}

fn sample_field(input: SampleInput, s: &Resolved) -> CliResult<Outcome> {
    if input.count < 2 {
        return Err(invalid("count must be at least 2"));
    }
    let count = input.count;
    let sigmas = s.tolerances.sampling_sigmas;
    let mut results = json!({ "count": count });
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let law = match (&input.kernel, &input.field) {
        (Some(_), Some(_)) => return Err(invalid("give at most one of \"kernel\" and \"field\"")),
        (Some(k), None) => {
            let model = k.to_model()?;
            let f = gns_factor(&model)?;
            let gram = (f.gram() - model.kernel()).camax();
            let mut rep = 0.0_f64;
            for (perm, u) in model.group().iter().zip(&f.representation) {
                for j in 0..model.len() {
                    rep = rep.max((u * f.vector(j) - f.vector(perm[j])).camax());
                }
            }
            checks.push(("GNS Gram identity".to_string(), gram, qfl_core::fields::KERNEL_TOL));
            checks.push(("group representation intertwines".to_string(), rep, 1e-9));
            let vectors: Vec<ComplexVector> = (0..model.len()).map(|j| f.vector(j)).collect();
            let u0 = match &input.coefficients {
                None => ComplexVector::zeros(f.rank()),
                Some(c) if c.len() == model.len() => &f.vectors * complex_vector(c),
                Some(c) => return Err(invalid(format!("need {} coefficients, got {}", model.len(), c.len()))),
            };
            results["gns_rank"] = json!(f.rank());
            results["points"] = json!(model.points());
            Some(coherent_gaussian_field(&u0, &vectors, input.family.into())?)
        }
        (None, Some(fd)) => {
            let vectors: Vec<ComplexVector> = fd.vectors.iter().map(|v| complex_vector(v)).collect();
            Some(coherent_gaussian_field(&complex_vector(&fd.u0), &vectors, fd.family.into())?)
        }
        (None, None) => None,
    };
    if let Some(law) = law {
        let draws = law.sample(count, s.seed)?;
        let k = law.mean.len();
        let mean = draws.row_mean();
        let centred = RealMatrix::from_fn(count, k, |r, c| draws[(r, c)] - mean[c]);
        let emp = centred.transpose() * &centred / (count as f64 - 1.0);
        let cov_gap = (&emp - &law.covariance).norm();
        let root = (count as f64).sqrt();
        let mean_gap = (0..k)
            .map(|j| (mean[j] - law.mean[j]).abs() / (law.covariance[(j, j)].max(f64::MIN_POSITIVE) / count as f64).sqrt())
            .fold(0.0, f64::max);
        results["gaussian"] = json!({
            "law": law_json(&law),
            "empirical_mean": mean.iter().copied().collect::<Vec<_>>(),
            "empirical_covariance": real_matrix_dto(&emp),
        });
        checks.push(("empirical mean (standard errors)".into(), mean_gap, sigmas));
        checks.push(("empirical covariance Frobenius error".into(), cov_gap, sigmas * law.covariance.norm() / root));
        let mut table = Table::new((1..=k).map(|j| format!("x{j}")).collect());
        table.rows = draws.row_iter().map(|r| r.iter().copied().collect()).collect();
        tables.push(("samples.csv".to_string(), table));
    }
    if let Some(l) = &input.levy {
        let law = levy_law(&complex_matrix(&l.h, "H")?, &complex_vector(&l.u))?;
        let samples = law.sample(count, s.seed.wrapping_add(1))?;
        let mut gap = 0.0_f64;
        for i in 0..25 {
            let t = -3.0 + 0.25 * i as f64;
            gap = gap.max((empirical_characteristic_function(&samples, t) - law.characteristic_function(t)).norm());
        }
        results["levy"] = json!({
            "atoms": law.atoms.iter().map(|&(x, m)| json!({ "x": x, "mass": m })).collect::<Vec<_>>(),
            "mean": law.mean(),
            "variance": law.variance(),
            "max_ecf_gap": gap,
        });
        checks.push(("Levy characteristic function on [-3, 3]".into(), gap, sigmas / (count as f64).sqrt()));
        let mut table = Table::new(vec!["x".into()]);
        table.rows = samples.iter().map(|x| vec![*x]).collect();
        tables.push(("levy_samples.csv".to_string(), table));
    }
    if tables.is_empty() {
        return Err(invalid("give a \"kernel\", a \"field\" or a \"levy\" block"));
    }
    let mut out = Outcome::new(results);
    for (name, v, tol) in checks {
        out.check_le(name, v, tol);
    }
    out.tables = tables;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_ends() {
        let t = Times { times: None, grid: Some(Grid { start: 0.0, stop: 2.0, count: 5 }) }.resolve().unwrap();
        assert_eq!(t, [0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(Times { times: Some(vec![1.0]), grid: Some(Grid { start: 0.0, stop: 1.0, count: 2 }) }
            .resolve()
            .is_err());
        assert!(Times { times: Some(vec![-1.0]), grid: None }.resolve().is_err());
        assert!(Times { times: Some(vec![]), grid: None }.resolve().is_err());
    }

    #[test]
    fn column_layout() {
        assert_eq!(moment_columns(2).len(), 1 + 2 + 2 + 16);
        let st = GaussianState::vacuum(2).unwrap();
        assert_eq!(moment_row(0.0, &st).len(), moment_columns(2).len());
    }

    #[test]
    fn probes_stay_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(random_vector(&mut rng, 3, 0.5).norm() <= 0.5 + 1e-15);
        }
    }
}
