//! Experiment kinds. Each kind computes result tables in memory; files are
//! written only after the computation finishes, in a fixed order.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use hcb_core::basis::{project_sector, sector_basis, PureState, SectorBasis, Space};
use hcb_core::circuit::{
    closed_form_coupling, closed_form_qubit_capacitance, parasitic_coupling_floating_numeric, parasitic_grid,
    reduce_floating, CapacitanceNetwork,
};
use hcb_core::drive::{
    default_duration, derive_drive_operator, detuning_line_statistics, prepare_checkpoints, random_phase_drive,
    sector_energy_moments, sector_overlaps, weight_near_line, DriveOperator, DriveSpec, OverlapRecord,
    ResonatorCoupling,
};
use hcb_core::hamiltonian::{build_sector_hamiltonian, sample_disorder, DisorderRealization};
use hcb_core::krylov::{EvolutionOptions, EvolutionReport};
use hcb_core::lattice::{build_square_lattice, LatticeSpec, Subset};
use hcb_core::observables::CorrelationFitOptions;
use hcb_core::planner;
use hcb_core::spectra::{diagonalize_sector_with, EigenDecomposition, Mode, SolverOptions, SymmetricBackend};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{mean_std, median, nearest_fraction, EigenstateRecord, StateAnalyzer, StateObservables};
use crate::config::{DriveSourceName, ExperimentConfig, ExperimentKind, SpectrumMode};
use crate::lapack_backend::select_backend;
use crate::output::{write_artifacts, write_manifest, Artifact, RunManifest, StageTiming};
use crate::svg::{render_svg, FigureKind};
use crate::table::{Cell, Table};

/// Fraction of a sector's eigenstates taken around the center and each edge
/// in the band summary.
pub const BAND_FRACTION: f64 = 0.1;

/// Everything a run produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub stages: Vec<StageTiming>,
    pub seeds: Vec<u64>,
    pub warnings: Vec<String>,
    pub eigensolver: String,
}

/// Runs `config` and writes its tables, figures and manifest to `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    let outcome = execute(config)?;
    let outputs = write_artifacts(out_dir, &outcome.artifacts)?;
    let manifest = RunManifest {
        code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        eigensolver: outcome.eigensolver,
        config: config.clone(),
        seeds: outcome.seeds,
        stages: outcome.stages,
        outputs,
        warnings: outcome.warnings,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

/// Computes every artifact of `config` without writing.
pub fn execute(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    let mut ctx = Context::new(config)?;
    match config.kind {
        ExperimentKind::Spectrum => spectrum(&mut ctx, false)?,
        ExperimentKind::SpectrumFigure => spectrum(&mut ctx, true)?,
        ExperimentKind::EigenstateObservables => eigenstate_observables(&mut ctx)?,
        ExperimentKind::DisorderSweep => disorder_sweep(&mut ctx)?,
        ExperimentKind::StatePrep => state_prep(&mut ctx)?,
        ExperimentKind::PrepObservables => prep_observables(&mut ctx)?,
        ExperimentKind::Circuit => circuit(&mut ctx)?,
        ExperimentKind::Planner => planner_report(&mut ctx)?,
    }
    Ok(Outcome {
        artifacts: ctx.artifacts,
        stages: ctx.stages,
        seeds: ctx.seeds,
        warnings: ctx.warnings,
        eigensolver: ctx.backend.name().into(),
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    lattice: LatticeSpec,
    backend: &'static dyn SymmetricBackend,
    solver: SolverOptions,
    artifacts: Vec<Artifact>,
    stages: Vec<StageTiming>,
    seeds: Vec<u64>,
    warnings: Vec<String>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let lattice = build_square_lattice(cfg.lattice.rows, cfg.lattice.cols)?;
        let needs_solver = !matches!(cfg.kind, ExperimentKind::Circuit | ExperimentKind::Planner);
        let backend: &'static dyn SymmetricBackend =
            if needs_solver { select_backend() } else { &hcb_core::spectra::NativeBackend };
        let solver = SolverOptions {
            residual_tolerance: cfg.tolerances.residual,
            dense_limit: cfg.tolerances.dense_limit,
            ..SolverOptions::default()
        };
        Ok(Self {
            cfg,
            lattice,
            backend,
            solver,
            artifacts: Vec::new(),
            stages: Vec::new(),
            seeds: Vec::new(),
            warnings: Vec::new(),
        })
    }

    fn j(&self) -> f64 {
        self.cfg.hopping
    }

    fn note_seed(&mut self, seed: u64) {
        if !self.seeds.contains(&seed) {
            self.seeds.push(seed);
        }
    }

    fn disorder(&mut self, seed: u64, spread_over_j: f64) -> Result<DisorderRealization> {
        self.note_seed(seed);
        Ok(sample_disorder(self.lattice.num_sites(), spread_over_j * self.j(), seed, self.cfg.exact_rms)?)
    }

    fn stage<T>(&mut self, name: impl Into<String>, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let name = name.into();
        let start = Instant::now();
        let out = f(self).with_context(|| format!("stage `{name}`"))?;
        self.stages.push(StageTiming { name, seconds: start.elapsed().as_secs_f64() });
        Ok(out)
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.artifacts.push(Artifact::new(name, table.to_csv()?));
        Ok(())
    }

    fn figure(&mut self, name: &str, table: &Table, kind: FigureKind) -> Result<()> {
        self.artifacts.push(Artifact::new(name, render_svg(table, kind)?));
        Ok(())
    }

    /// Window counts larger than the sector are clamped to its dimension.
    fn diagonalize(&self, disorder: &DisorderRealization, basis: &SectorBasis, mode: Mode) -> Result<EigenDecomposition> {
        let mode = match mode {
            Mode::Window { target, count } => Mode::Window { target, count: count.min(basis.len()) },
            m => m,
        };
        let h = build_sector_hamiltonian(&self.lattice, disorder, self.j(), basis)?;
        diagonalize_sector_with(&h, basis.excitations(), mode, self.backend, &self.solver).map_err(|e| match e {
            hcb_core::Error::Capacity { requested, max } => anyhow::anyhow!(
                "sector {} has dimension {requested}, above the dense limit {max}; configure window mode",
                basis.excitations()
            ),
            e => e.into(),
        })
    }

    fn subsets(&self) -> Result<Vec<Subset>> {
        Ok(self.lattice.enumerate_subsets(self.cfg.subsets.policy())?)
    }

    fn fit_options(&self) -> CorrelationFitOptions {
        CorrelationFitOptions { floor: self.cfg.tolerances.correlation_floor, xi_cap: self.cfg.tolerances.xi_cap }
    }

    fn analyzer(&self, space: Space, subsets: &[Subset]) -> Result<StateAnalyzer> {
        Ok(StateAnalyzer::new(&self.lattice, space, subsets, self.cfg.subsets.max_sites, self.fit_options())?)
    }

    fn mhz(&self, epsilon_over_j: f64) -> Cell {
        self.cfg.presentation.hopping_mhz.map(|j| epsilon_over_j * j).into()
    }
}

fn spectrum_mode(cfg: &ExperimentConfig, vectors: bool) -> Mode {
    match cfg.spectrum.mode {
        SpectrumMode::Window => Mode::Window { target: cfg.spectrum.target * cfg.hopping, count: cfg.spectrum.count },
        SpectrumMode::Full if vectors => Mode::Full,
        _ => Mode::ValuesOnly,
    }
}

fn spectrum(ctx: &mut Context, figure: bool) -> Result<()> {
    let mut table = Table::new(&["seed", "n", "index", "epsilon_over_j", "epsilon_mhz"]);
    let mode = spectrum_mode(ctx.cfg, false);
    for seed in ctx.cfg.seeds.clone() {
        let disorder = ctx.disorder(seed, ctx.cfg.disorder)?;
        let decs = ctx.stage(format!("spectra seed {seed}"), |c| {
            let sites = c.lattice.num_sites();
            c.cfg
                .sector_list()
                .par_iter()
                .map(|&n| c.diagonalize(&disorder, &sector_basis(sites, n)?, mode))
                .collect::<Result<Vec<_>>>()
        })?;
        for dec in &decs {
            for (k, &e) in dec.values().iter().enumerate() {
                let e = e / ctx.j();
                table.push(vec![seed.into(), dec.sector().into(), k.into(), e.into(), ctx.mhz(e)])?;
            }
        }
    }
    ctx.table("spectrum.csv", &table)?;
    if figure {
        ctx.figure("spectrum.svg", &table, FigureKind::Spectrum)?;
    }
    Ok(())
}

/// Eigenvectors and per-cluster observables of one sector.
pub struct SectorObservables {
    pub decomposition: EigenDecomposition,
    pub records: Vec<EigenstateRecord>,
}

fn sector_observables(
    ctx: &Context,
    disorder: &DisorderRealization,
    n: usize,
    subsets: &[Subset],
    mode: Mode,
) -> Result<SectorObservables> {
    let basis = Arc::new(sector_basis(ctx.lattice.num_sites(), n)?);
    let decomposition = ctx.diagonalize(disorder, &basis, mode)?;
    let analyzer = ctx.analyzer(Space::Sector(basis), subsets)?;
    let records = analyzer.eigenstates(&decomposition, |_| true)?;
    Ok(SectorObservables { decomposition, records })
}

/// Medians over the `fraction` of clusters nearest the lower edge, the
/// center `ε = 0` and the upper edge.
pub fn band_summary(records: &[EigenstateRecord], center: f64, fraction: f64) -> Vec<(&'static str, usize, Option<f64>, Option<f64>)> {
    if records.is_empty() {
        return Vec::new();
    }
    let energies: Vec<f64> = records.iter().map(|r| r.energy).collect();
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [("lower-edge", lo), ("center", center), ("upper-edge", hi)]
        .into_iter()
        .map(|(label, target)| {
            let idx = nearest_fraction(&energies, target, fraction);
            let xi = median(idx.iter().filter_map(|&i| records[i].observables.xi));
            let ratio = median(idx.iter().map(|&i| records[i].observables.ratio()));
            (label, idx.len(), xi, ratio)
        })
        .collect()
}

fn observables_cells(o: &StateObservables) -> Vec<Cell> {
    vec![o.xi.into(), o.xi_saturated.into(), o.s_v.into(), o.s_a.into(), o.ratio().into(), o.entropy_residual.into()]
}

fn eigenstate_observables(ctx: &mut Context) -> Result<()> {
    if ctx.cfg.spectrum.mode == SpectrumMode::Values {
        bail!("eigenstate-observables needs eigenvectors; use spectrum mode `full` or `window`");
    }
    let mode = spectrum_mode(ctx.cfg, true);
    let subsets = ctx.subsets()?;
    let mut table = Table::new(&[
        "seed",
        "n",
        "index",
        "cluster_size",
        "epsilon_over_j",
        "epsilon_mhz",
        "xi",
        "xi_saturated",
        "s_v",
        "s_a",
        "ratio",
        "entropy_residual",
    ]);
    let mut summary = Table::new(&["seed", "n", "region", "states", "median_xi", "median_ratio"]);
    for seed in ctx.cfg.seeds.clone() {
        let disorder = ctx.disorder(seed, ctx.cfg.disorder)?;
        for n in ctx.cfg.sector_list() {
            let sector = ctx.stage(format!("observables seed {seed} sector {n}"), |c| {
                sector_observables(c, &disorder, n, &subsets, mode)
            })?;
            for r in &sector.records {
                let e = r.energy / ctx.j();
                let mut row = vec![seed.into(), n.into(), r.index.into(), r.cluster_size.into(), e.into(), ctx.mhz(e)];
                row.extend(observables_cells(&r.observables));
                table.push(row)?;
            }
            if matches!(mode, Mode::Full) {
                for (region, count, xi, ratio) in band_summary(&sector.records, 0.0, BAND_FRACTION) {
                    summary.push(vec![seed.into(), n.into(), region.into(), count.into(), xi.into(), ratio.into()])?;
                }
            }
        }
    }
    ctx.table("eigenstates.csv", &table)?;
    ctx.table("band_summary.csv", &summary)?;
    ctx.figure("eigenstates_xi.svg", &table, FigureKind::EigenstateXi)?;
    ctx.figure("eigenstates_ratio.svg", &table, FigureKind::EigenstateRatio)?;
    Ok(())
}

/// Mean `s_V / s_A` of the `count` eigenstates nearest `target` and their
/// mean energy.
fn window_ratio(
    ctx: &Context,
    disorder: &DisorderRealization,
    basis: &Arc<SectorBasis>,
    analyzer: &StateAnalyzer,
    target: f64,
    count: usize,
) -> Result<(f64, f64)> {
    let dec = ctx.diagonalize(disorder, basis, Mode::Window { target, count })?;
    let ratios = (0..dec.len())
        .map(|k| Ok(analyzer.real_state(dec.vector(k).expect("window mode keeps vectors"))?.ratio()))
        .collect::<Result<Vec<f64>>>()?;
    let energy = dec.values().iter().sum::<f64>() / dec.len() as f64;
    Ok((ratios.iter().sum::<f64>() / ratios.len() as f64, energy))
}

fn disorder_sweep(ctx: &mut Context) -> Result<()> {
    let sweep = ctx.cfg.sweep.clone();
    if sweep.sector > ctx.lattice.num_sites() {
        bail!("sweep sector {} exceeds the lattice size", sweep.sector);
    }
    let basis = Arc::new(sector_basis(ctx.lattice.num_sites(), sweep.sector)?);
    let count = sweep.window_count.min(basis.len());
    let subsets = ctx.subsets()?;
    let analyzer = ctx.analyzer(Space::Sector(basis.clone()), &subsets)?;
    let mut points = Table::new(&[
        "disorder_over_j",
        "seed",
        "center_epsilon_over_j",
        "edge_epsilon_over_j",
        "center_ratio",
        "edge_ratio",
        "ratio",
    ]);
    let mut table = Table::new(&["disorder_over_j", "mean", "std", "seeds"]);
    for &spread in &sweep.disorders {
        let mut ratios = Vec::new();
        for seed in ctx.cfg.seeds.clone() {
            let disorder = ctx.disorder(seed, spread)?;
            let j = ctx.j();
            let ((center, ec), (edge, ee)) = ctx.stage(format!("sweep disorder {spread} seed {seed}"), |c| {
                Ok((
                    window_ratio(c, &disorder, &basis, &analyzer, sweep.center * j, count)?,
                    window_ratio(c, &disorder, &basis, &analyzer, sweep.edge * j, count)?,
                ))
            })?;
            let r = center / edge;
            ratios.push(r);
            points.push(vec![
                spread.into(),
                seed.into(),
                (ec / j).into(),
                (ee / j).into(),
                center.into(),
                edge.into(),
                r.into(),
            ])?;
        }
        let (mean, std) = mean_std(&ratios);
        table.push(vec![spread.into(), mean.into(), std.into(), ratios.len().into()])?;
    }
    ctx.table("sweep_points.csv", &points)?;
    ctx.table("sweep.csv", &table)?;
    ctx.figure("sweep.svg", &table, FigureKind::DisorderSweep)?;
    Ok(())
}

/// Drive operator of the configured resonator line, normalized, with
/// strength `g̃` set afterwards.
pub fn derived_drive(cfg: &ExperimentConfig, lattice: &LatticeSpec, detuning: f64) -> Result<(DriveOperator, Vec<String>)> {
    let line = &cfg.drive.resonators;
    let j = cfg.hopping;
    let mut resonators: Vec<ResonatorCoupling> = (0..lattice.num_sites())
        .map(|i| ResonatorCoupling {
            site: i,
            detuning: line.detuning * j,
            coupling: line.coupling * j,
            linewidth: line.linewidth * j,
            delay: line.first_delay_ns + i as f64 * line.delay_spacing_ns,
        })
        .collect();
    for o in &line.sites {
        let r = resonators.get_mut(o.site).with_context(|| format!("resonator override for missing site {}", o.site))?;
        r.detuning = o.detuning.map_or(r.detuning, |v| v * j);
        r.coupling = o.coupling.map_or(r.coupling, |v| v * j);
        r.linewidth = o.linewidth.map_or(r.linewidth, |v| v * j);
        r.delay = o.delay_ns.unwrap_or(r.delay);
    }
    let spec = DriveSpec {
        sites: lattice.num_sites(),
        resonators,
        field: 1.0,
        drive_frequency: std::f64::consts::TAU * line.drive_frequency_ghz,
        detuning,
    };
    let warnings = spec.validate()?.iter().map(|w| format!("{w:?}")).collect();
    Ok((derive_drive_operator(&spec)?, warnings))
}

fn drive_for(ctx: &mut Context, source: DriveSourceName, detuning: f64, strength: f64) -> Result<DriveOperator> {
    match source {
        DriveSourceName::Derived => {
            let (op, warnings) = derived_drive(ctx.cfg, &ctx.lattice, detuning)?;
            for w in warnings {
                if !ctx.warnings.contains(&w) {
                    ctx.warnings.push(w);
                }
            }
            Ok(op.with_strength(strength))
        }
        DriveSourceName::RandomPhase => {
            let seed = ctx.cfg.drive.random_seed;
            ctx.note_seed(seed);
            Ok(random_phase_drive(&ctx.lattice, seed, strength))
        }
    }
}

fn source_label(source: DriveSourceName) -> &'static str {
    match source {
        DriveSourceName::Derived => "derived",
        DriveSourceName::RandomPhase => "random-phase",
    }
}

fn evolution_options(cfg: &ExperimentConfig) -> EvolutionOptions {
    EvolutionOptions { tolerance: cfg.tolerances.krylov, ..EvolutionOptions::default() }
}

/// Overlaps of `states` with every sector's eigenbasis, one sector at a
/// time so that only one set of eigenvectors is alive.
fn overlap_pass(ctx: &mut Context, disorder: &DisorderRealization, states: &[&PureState]) -> Result<Vec<Vec<OverlapRecord>>> {
    let mut out = vec![Vec::new(); states.len()];
    for n in 0..=ctx.lattice.num_sites() {
        let per_state = ctx.stage(format!("overlaps sector {n}"), |c| {
            let basis = sector_basis(c.lattice.num_sites(), n)?;
            let dec = c.diagonalize(disorder, &basis, Mode::Full)?;
            Ok(sector_overlaps(states, &dec, &basis)?)
        })?;
        for (acc, recs) in out.iter_mut().zip(per_state) {
            acc.extend(recs);
        }
    }
    Ok(out)
}

fn state_prep(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let j = ctx.j();
    let delta = cfg.drive.detunings.first().copied().context("state-prep needs one detuning")? * j;
    let source = cfg.drive.sources.first().copied().context("state-prep needs one drive source")?;
    if cfg.drive.strengths.is_empty() {
        bail!("state-prep needs at least one strength");
    }
    let seed = cfg.seeds[0];
    let disorder = ctx.disorder(seed, cfg.disorder)?;
    let duration_for = |g: f64| cfg.drive.duration.map(|t| t / j).unwrap_or_else(|| default_duration(j, g));
    let opts = evolution_options(cfg);

    // Time panel at the first strength, then the final state at each strength.
    let g0 = cfg.drive.strengths[0] * j;
    let times: Vec<f64> = cfg.drive.time_fractions.iter().map(|f| f * duration_for(g0)).collect();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&k| times[k]).collect();
    let drive0 = drive_for(ctx, source, delta, g0)?;
    let (checkpoints, report0) =
        ctx.stage("evolve time panel", |c| Ok(prepare_checkpoints(&c.lattice, &disorder, j, &drive0, delta, &sorted, &opts)?))?;
    let mut time_states: Vec<(f64, PureState)> = sorted.iter().copied().zip(checkpoints).collect();
    time_states.dedup_by(|a, b| a.0 == b.0);

    let mut strength_states = Vec::new();
    for &g in &cfg.drive.strengths {
        let drive = drive_for(ctx, source, delta, g * j)?;
        let t = duration_for(g * j);
        let (mut s, report) = ctx.stage(format!("evolve strength {g}"), |c| {
            Ok(prepare_checkpoints(&c.lattice, &disorder, j, &drive, delta, &[t], &opts)?)
        })?;
        strength_states.push((g, t, s.remove(0), report));
    }

    let refs: Vec<&PureState> =
        time_states.iter().map(|(_, s)| s).chain(strength_states.iter().map(|(_, _, s, _)| s)).collect();
    let overlaps = overlap_pass(ctx, &disorder, &refs)?;
    let (time_overlaps, strength_overlaps) = overlaps.split_at(time_states.len());

    let columns = ["panel", "n", "epsilon_over_j", "weight", "cluster_size"];
    let floor = cfg.drive.weight_floor;
    let overlap_table = |panels: &[f64], sets: &[Vec<OverlapRecord>]| -> Result<Table> {
        let mut t = Table::new(&columns);
        for (p, recs) in panels.iter().zip(sets) {
            for r in recs.iter().filter(|r| r.weight >= floor) {
                t.push(vec![(*p).into(), r.n.into(), (r.epsilon / j).into(), r.weight.into(), r.cluster_size.into()])?;
            }
        }
        Ok(t)
    };
    let time_panels: Vec<f64> = time_states.iter().map(|(t, _)| t * j).collect();
    let strength_panels: Vec<f64> = strength_states.iter().map(|(g, ..)| *g).collect();
    let time_table = overlap_table(&time_panels, time_overlaps)?;
    let strength_table = overlap_table(&strength_panels, strength_overlaps)?;

    let mut summary = Table::new(&[
        "panel_kind",
        "time_j",
        "strength_over_j",
        "mean_offset_over_j",
        "width_over_j",
        "weight_near_line",
        "total_weight",
        "norm_drift",
    ]);
    let half_width = |g: f64| cfg.drive.selectivity_width * g;
    for ((t, _), recs) in time_states.iter().zip(time_overlaps) {
        let (mean, sd, total) = detuning_line_statistics(recs, delta);
        summary.push(vec![
            "time".into(),
            (t * j).into(),
            cfg.drive.strengths[0].into(),
            (mean / j).into(),
            (sd / j).into(),
            weight_near_line(recs, delta, half_width(g0)).into(),
            total.into(),
            report0.norm_drift.into(),
        ])?;
    }
    for ((g, t, _, report), recs) in strength_states.iter().zip(strength_overlaps) {
        let (mean, sd, total) = detuning_line_statistics(recs, delta);
        summary.push(vec![
            "strength".into(),
            (t * j).into(),
            (*g).into(),
            (mean / j).into(),
            (sd / j).into(),
            weight_near_line(recs, delta, half_width(g * j)).into(),
            total.into(),
            report.norm_drift.into(),
        ])?;
    }
    ctx.table("overlaps_time.csv", &time_table)?;
    ctx.table("overlaps_strength.csv", &strength_table)?;
    ctx.table("prep_summary.csv", &summary)?;
    ctx.figure("overlaps_time.svg", &time_table, FigureKind::OverlapHeatmap)?;
    ctx.figure("overlaps_strength.svg", &strength_table, FigureKind::OverlapHeatmap)?;
    Ok(())
}

/// Post-selected view of one prepared state in one sector.
#[derive(Debug, Clone)]
pub struct SectorProjection {
    pub n: usize,
    pub weight: f64,
    pub mean_offset: f64,
    pub width: f64,
    pub observables: Option<StateObservables>,
}

/// Min and max of eigenstate `ξ` and `s_V/s_A` over records with energy in
/// `[lo, hi]`, with the number of records.
pub fn envelope(records: &[EigenstateRecord], lo: f64, hi: f64) -> (usize, Option<(f64, f64)>, Option<(f64, f64)>) {
    let inside: Vec<&EigenstateRecord> = records.iter().filter(|r| r.energy >= lo && r.energy <= hi).collect();
    let span = |vals: Vec<f64>| -> Option<(f64, f64)> {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    };
    let xi = span(inside.iter().filter_map(|r| r.observables.xi).collect());
    let ratio = span(inside.iter().map(|r| r.observables.ratio()).filter(|x| x.is_finite()).collect());
    (inside.len(), xi, ratio)
}

fn weighted_mean(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (w, v) in pairs {
        if v.is_finite() {
            num += w * v;
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

fn merge_span(acc: &mut Option<(f64, f64)>, s: Option<(f64, f64)>) {
    if let Some((lo, hi)) = s {
        *acc = Some(match *acc {
            Some((a, b)) => (a.min(lo), b.max(hi)),
            None => (lo, hi),
        });
    }
}

/// Weighted means of capped values can land an ulp past the cap.
pub fn in_span(v: f64, lo: f64, hi: f64) -> bool {
    let slack = 1e-12 * lo.abs().max(hi.abs());
    v >= lo - slack && v <= hi + slack
}

fn within(v: Option<f64>, span: Option<(f64, f64)>) -> Cell {
    match (v, span) {
        (Some(v), Some((lo, hi))) => Cell::Bool(in_span(v, lo, hi)),
        _ => Cell::Empty,
    }
}

struct Prepared {
    source: DriveSourceName,
    delta: f64,
    state: PureState,
    report: EvolutionReport,
}

fn prep_observables(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let j = ctx.j();
    let g = cfg.drive.strengths.first().copied().context("prep-observables needs one strength")? * j;
    let seed = cfg.seeds[0];
    let disorder = ctx.disorder(seed, cfg.disorder)?;
    let duration = cfg.drive.duration.map(|t| t / j).unwrap_or_else(|| default_duration(j, g));
    let opts = evolution_options(cfg);
    let subsets = ctx.subsets()?;
    let sectors = cfg.sector_list();

    let mut jobs = Vec::new();
    for &source in &cfg.drive.sources {
        for &d in &cfg.drive.detunings {
            jobs.push((source, d * j, drive_for(ctx, source, d * j, g)?));
        }
    }
    let prepared: Vec<Prepared> = ctx.stage("prepare states", |c| {
        jobs.par_iter()
            .map(|(source, delta, drive)| {
                let (mut s, report) = prepare_checkpoints(&c.lattice, &disorder, j, drive, *delta, &[duration], &opts)?;
                Ok(Prepared { source: *source, delta: *delta, state: s.remove(0), report })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let full = ctx.stage("full-state observables", |c| {
        let analyzer = c.analyzer(Space::Full { sites: c.lattice.num_sites() }, &subsets)?;
        prepared.par_iter().map(|p| Ok(analyzer.complex_state(p.state.amplitudes())?)).collect::<Result<Vec<_>>>()
    })?;

    let mut eigen_table =
        Table::new(&["n", "index", "cluster_size", "epsilon_over_j", "rescaled_over_j", "xi", "xi_saturated", "ratio"]);
    let mut sector_table = Table::new(&[
        "drive",
        "delta_over_j",
        "n",
        "weight",
        "mean_offset_over_j",
        "width_over_j",
        "window_lo_over_j",
        "window_hi_over_j",
        "window_states",
        "xi",
        "ratio",
        "xi_min",
        "xi_max",
        "ratio_min",
        "ratio_max",
    ]);
    let mut plot = Table::new(&["series", "delta_over_j", "xi", "ratio"]);
    let mut per_state: Vec<Vec<(SectorProjection, Option<(f64, f64)>, Option<(f64, f64)>)>> = vec![Vec::new(); prepared.len()];
    for &n in &sectors {
        let (records, projections) = ctx.stage(format!("sector {n} eigenstates and projections"), |c| {
            let basis = Arc::new(sector_basis(c.lattice.num_sites(), n)?);
            let h = build_sector_hamiltonian(&c.lattice, &disorder, j, &basis)?;
            let dec = diagonalize_sector_with(&h, n, Mode::Full, c.backend, &c.solver)?;
            let analyzer = c.analyzer(Space::Sector(basis.clone()), &subsets)?;
            let records = analyzer.eigenstates(&dec, |_| true)?;
            drop(dec);
            let projections = prepared
                .par_iter()
                .map(|p| {
                    let proj = project_sector(&p.state, &basis)?;
                    let Some(state) = proj.state else {
                        return Ok(SectorProjection { n, weight: 0.0, mean_offset: 0.0, width: 0.0, observables: None });
                    };
                    let (mean_offset, width) = sector_energy_moments(&h, state.amplitudes(), n, p.delta)?;
                    Ok(SectorProjection {
                        n,
                        weight: proj.weight,
                        mean_offset,
                        width,
                        observables: Some(analyzer.complex_state(state.amplitudes())?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((records, projections))
        })?;
        for r in &records {
            let e = r.energy / j;
            let rescaled = if n > 0 { e / n as f64 } else { f64::NAN };
            eigen_table.push(vec![
                n.into(),
                r.index.into(),
                r.cluster_size.into(),
                e.into(),
                rescaled.into(),
                r.observables.xi.into(),
                r.observables.xi_saturated.into(),
                r.observables.ratio().into(),
            ])?;
            plot.push(vec![
                format!("eigenstates n={n}").into(),
                rescaled.into(),
                r.observables.xi.into(),
                r.observables.ratio().into(),
            ])?;
        }
        for (k, proj) in projections.into_iter().enumerate() {
            let p = &prepared[k];
            let center = n as f64 * p.delta + proj.mean_offset;
            let half = cfg.drive.window_sigmas * proj.width;
            let (count, xi_span, ratio_span) = envelope(&records, center - half, center + half);
            let o = proj.observables.as_ref();
            sector_table.push(vec![
                source_label(p.source).into(),
                (p.delta / j).into(),
                n.into(),
                proj.weight.into(),
                (proj.mean_offset / j).into(),
                (proj.width / j).into(),
                ((center - half) / j).into(),
                ((center + half) / j).into(),
                count.into(),
                o.and_then(|o| o.xi).into(),
                o.map(|o| o.ratio()).into(),
                xi_span.map(|s| s.0).into(),
                xi_span.map(|s| s.1).into(),
                ratio_span.map(|s| s.0).into(),
                ratio_span.map(|s| s.1).into(),
            ])?;
            per_state[k].push((proj, xi_span, ratio_span));
        }
    }

    let mut table = Table::new(&[
        "drive",
        "delta_over_j",
        "sector_weight",
        "xi",
        "ratio",
        "xi_min",
        "xi_max",
        "ratio_min",
        "ratio_max",
        "xi_within",
        "ratio_within",
        "full_xi",
        "full_ratio",
        "norm_drift",
    ]);
    for (k, p) in prepared.iter().enumerate() {
        let parts = &per_state[k];
        let weight: f64 = parts.iter().map(|(s, ..)| s.weight).sum();
        let xi = weighted_mean(parts.iter().filter_map(|(s, ..)| Some((s.weight, s.observables.as_ref()?.xi?))));
        let ratio = weighted_mean(parts.iter().filter_map(|(s, ..)| Some((s.weight, s.observables.as_ref()?.ratio()))));
        let (mut xi_span, mut ratio_span) = (None, None);
        for (s, xs, rs) in parts {
            if s.weight > 0.0 {
                merge_span(&mut xi_span, *xs);
                merge_span(&mut ratio_span, *rs);
            }
        }
        table.push(vec![
            source_label(p.source).into(),
            (p.delta / j).into(),
            weight.into(),
            xi.into(),
            ratio.into(),
            xi_span.map(|s| s.0).into(),
            xi_span.map(|s| s.1).into(),
            ratio_span.map(|s| s.0).into(),
            ratio_span.map(|s| s.1).into(),
            within(xi, xi_span),
            within(ratio, ratio_span),
            full[k].xi.into(),
            full[k].ratio().into(),
            p.report.norm_drift.into(),
        ])?;
        plot.push(vec![source_label(p.source).into(), (p.delta / j).into(), xi.into(), ratio.into()])?;
    }
    ctx.table("prep_eigenstates.csv", &eigen_table)?;
    ctx.table("prep_sectors.csv", &sector_table)?;
    ctx.table("prep_observables.csv", &table)?;
    ctx.figure("prep_xi.svg", &plot, FigureKind::PrepXi)?;
    ctx.figure("prep_ratio.svg", &plot, FigureKind::PrepRatio)?;
    Ok(())
}

fn circuit(ctx: &mut Context) -> Result<()> {
    let c = &ctx.cfg.circuit;
    let mut grid = Table::new(&["c_p", "c_p_prime", "c_g", "c_eff_floating", "c_eff_grounded", "ratio", "c_eff_numeric"]);
    for p in parasitic_grid(c.c_p, &c.c_p_prime, &c.c_g)? {
        let numeric = parasitic_coupling_floating_numeric(p.c_g, p.c_p, p.c_p_prime, c.c_sh, c.c_node)?;
        grid.push(vec![
            p.c_p.into(),
            p.c_p_prime.into(),
            p.c_g.into(),
            p.c_eff_floating.into(),
            p.c_p.into(),
            p.ratio.into(),
            numeric.into(),
        ])?;
    }
    let n = &c.network;
    let net = CapacitanceNetwork { c1: n.c1, c2: n.c2, c_sh: n.c_sh, c_r: n.c_r, c_g1: n.c_g1, c_g2: n.c_g2 };
    let reduced = reduce_floating(&net)?;
    let mut reduction = Table::new(&[
        "c1",
        "c2",
        "c_sh",
        "c_r",
        "c_g1",
        "c_g2",
        "c_qubit_numeric",
        "c_qubit_closed",
        "c_coupling_numeric",
        "c_coupling_closed",
        "residual",
    ]);
    reduction.push(vec![
        n.c1.into(),
        n.c2.into(),
        n.c_sh.into(),
        n.c_r.into(),
        n.c_g1.into(),
        n.c_g2.into(),
        reduced.c_qubit.into(),
        closed_form_qubit_capacitance(&net).into(),
        reduced.c_coupling.into(),
        closed_form_coupling(&net).into(),
        reduced.residual.into(),
    ])?;
    ctx.table("parasitic.csv", &grid)?;
    ctx.table("reduction.csv", &reduction)?;
    ctx.figure("parasitic.svg", &grid, FigureKind::Parasitic)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlannerReport {
    measurement_time: f64,
    critical_photons: f64,
    purcell_rate: f64,
    optimized_jt_printed: f64,
    optimized_jt_consistent: f64,
    optimal_linewidth: f64,
    fast_readout_threshold: f64,
    stark_freeze_lower_bound: f64,
    weak_continuous_threshold: f64,
    readout_regime: &'static str,
    model_regime: &'static str,
    model_regime_ambiguous: bool,
}

fn planner_report(ctx: &mut Context) -> Result<()> {
    let pc = &ctx.cfg.planner;
    let p = pc.params();
    let t = pc.thresholds();
    let cons = planner::constraints(&p)?;
    let model = planner::classify_model_regime_with(p.hopping, p.qubit_frequency, p.anharmonicity, p.spread, pc.scale_separation);
    let report = PlannerReport {
        measurement_time: planner::measurement_time(&p)?,
        critical_photons: cons.critical_photons,
        purcell_rate: cons.purcell_rate,
        optimized_jt_printed: planner::optimized_measurement_time(&p)?,
        optimized_jt_consistent: planner::optimized_measurement_time_consistent(&p)?,
        optimal_linewidth: planner::optimal_linewidth(&p)?,
        fast_readout_threshold: planner::fast_readout_threshold(&p, &t)?,
        stark_freeze_lower_bound: planner::stark_freeze_lower_bound(&p, &t)?,
        weak_continuous_threshold: planner::weak_continuous_threshold(&p, &t),
        readout_regime: planner::classify_readout_regime(&p, &t)?.label(),
        model_regime: model.regime.label(),
        model_regime_ambiguous: model.ambiguous,
    };
    let mut sweep = Table::new(&["j_over_a", "hop_distance", "fast_threshold_over_a", "weak_threshold_over_a", "regime"]);
    let a = p.anharmonicity.abs();
    for &l in &pc.sweep_hop_distance {
        for &ja in &pc.sweep_j_over_a {
            let q = planner::ReadoutParams { hopping: ja * a, hop_distance: l, ..p };
            sweep.push(vec![
                ja.into(),
                l.into(),
                (planner::fast_readout_threshold(&q, &t)? / a).into(),
                (planner::weak_continuous_threshold(&q, &t) / a).into(),
                planner::classify_readout_regime(&q, &t)?.label().into(),
            ])?;
        }
    }
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    ctx.artifacts.push(Artifact::new("planner.json", json));
    ctx.table("planner_sweep.csv", &sweep)?;
    Ok(())
}

/// Groups eigenstate records by sector.
pub fn by_sector(records: &[EigenstateRecord]) -> BTreeMap<usize, Vec<&EigenstateRecord>> {
    let mut out: BTreeMap<usize, Vec<&EigenstateRecord>> = BTreeMap::new();
    for r in records {
        out.entry(r.sector).or_default().push(r);
    }
    out
}
