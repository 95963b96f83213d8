//! Command-line driver.
//!
//! Exit codes: 0 when the command succeeds or the checked property holds,
//! 1 when a checked property is violated (a witness report goes to standard
//! output), 2 on input or usage errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use reserves_core::audit::{
    self, compute_cutoffs, CutoffMode, StabilityReport, VerificationVerdict,
};
use reserves_core::fixtures;
use reserves_core::format;
use reserves_core::gen::{self, GenParams};
use reserves_core::mechanisms::{self, MechanismId, MechanismInput};
use reserves_core::model::{Instance, RawInstance, SchoolId, SeatType, StudentId};
use reserves_core::oracle;

#[derive(Parser)]
#[command(
    name = "reserves",
    about = "Reserve-based admission mechanisms: run, audit, and brute-force-verify",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against the full model assumptions.
    Validate {
        /// Instance JSON file.
        instance: PathBuf,
    },
    /// Run a mechanism and write its result file.
    Run {
        #[arg(long)]
        mechanism: String,
        #[arg(long)]
        instance: PathBuf,
        /// Preference file in the shape the mechanism expects.
        #[arg(long)]
        prefs: PathBuf,
        /// Also write the round-by-round trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Result file destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute school cutoffs from a result file's matching.
    Cutoffs {
        /// eq1: any vacancy zeroes the open cutoff (unfilled reserves count
        /// as open seats). eq2: the open cutoff tracks the open quota only.
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        result: PathBuf,
    },
    /// Audit a result file: stability or one of the verification rules.
    Audit {
        #[arg(long, value_enum)]
        check: CheckArg,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        prefs: PathBuf,
        #[arg(long)]
        result: PathBuf,
    },
    /// Brute-force oracles for small markets.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Draw a random instance satisfying the full model assumptions.
    Gen {
        #[arg(long)]
        students: u32,
        #[arg(long)]
        schools: u32,
        #[arg(long)]
        types: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        reserve_density: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or export the bundled example markets.
    Fixtures {
        /// Write instance, preference, and golden files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Enumerate every stable matching.
    StableSet(InstancePrefsArgs),
    /// Enumerate the seat-typed selections passing the open-first audit.
    OrChoiceSet(ChoiceSetArgs),
    /// Exhaustive pure-equilibrium sweep for a two-stage mechanism.
    Ne {
        #[command(flatten)]
        base: InstancePrefsArgs,
        #[arg(long)]
        mechanism: String,
        /// Worker threads; 0 means one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Exhaustive misreport sweep; exits 1 when a profitable one exists.
    SpAudit {
        #[command(flatten)]
        base: InstancePrefsArgs,
        #[arg(long)]
        mechanism: String,
    },
    /// Cross-mechanism identity check; exits 1 on a mismatch.
    Equivalence {
        #[command(flatten)]
        base: InstancePrefsArgs,
        #[arg(long, value_enum)]
        pair: PairArg,
    },
    /// Reserved-seat minimality of the open-first rule; exits 1 on failure.
    MinReserved(ChoiceSetArgs),
}

#[derive(Args)]
struct InstancePrefsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    prefs: PathBuf,
}

#[derive(Args)]
struct ChoiceSetArgs {
    #[arg(long)]
    instance: PathBuf,
    /// School to select for; defaults to the only school.
    #[arg(long)]
    school: Option<String>,
    /// Applicant ids (comma-separated); defaults to every student.
    #[arg(long, value_delimiter = ',')]
    applicants: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Eq1,
    Eq2,
}

impl From<ModeArg> for CutoffMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Eq1 => CutoffMode::Pooled,
            ModeArg::Eq2 => CutoffMode::SetAside,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Stable,
    Ro,
    Or,
    SeqRo,
    SeqOr,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    /// Flexible subschool run on open-leading lists vs the sim-or mechanism.
    FlexO,
    /// Flexible subschool run on reserve-leading lists vs sim-ro.
    FlexR,
    /// Backward-transfer selection vs sim-or selection.
    Bt,
}

impl From<PairArg> for oracle::EquivalencePair {
    fn from(p: PairArg) -> Self {
        match p {
            PairArg::FlexO => oracle::EquivalencePair::FlexOpenFirst,
            PairArg::FlexR => oracle::EquivalencePair::FlexReserveFirst,
            PairArg::Bt => oracle::EquivalencePair::BackwardTransferSelection,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

type CliResult = Result<u8, String>;

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Validate { instance } => validate(&instance),
        Command::Run {
            mechanism,
            instance,
            prefs,
            trace,
            out,
        } => run(&mechanism, &instance, &prefs, trace.as_deref(), out.as_deref()),
        Command::Cutoffs {
            mode,
            instance,
            result,
        } => cutoffs(mode, &instance, &result),
        Command::Audit {
            check,
            instance,
            prefs,
            result,
        } => audit_cmd(check, &instance, &prefs, &result),
        Command::Oracle(cmd) => oracle_cmd(cmd),
        Command::Gen {
            students,
            schools,
            types,
            seed,
            reserve_density,
            out,
        } => gen_cmd(
            GenParams {
                students,
                schools,
                types,
                seed,
                reserve_density,
            },
            out.as_deref(),
        ),
        Command::Fixtures { out_dir } => fixtures_cmd(out_dir.as_deref()),
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            emit(text)
        }
    }
}

fn to_json<T: ?Sized + serde::Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value).map_err(|e| e.to_string())
}

/// Prints a line to standard output, treating a closed pipe as a normal end
/// of output rather than an error.
fn emit(text: &str) -> Result<(), String> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(e.to_string()),
    }
}

fn load_raw(path: &Path) -> Result<RawInstance, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

/// Mechanism and oracle inputs only need a well-formed market; the full
/// assumptions are the business of `validate`.
fn load_instance(path: &Path) -> Result<Instance, String> {
    load_raw(path)?
        .validate_structural()
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn validate(path: &Path) -> CliResult {
    match load_raw(path)?.validate() {
        Ok(_) => {
            emit(&to_json(&json!({"valid": true}))?)?;
            Ok(0)
        }
        Err(report) => {
            emit(&to_json(&json!({"valid": false, "violations": report.errors}))?)?;
            Ok(1)
        }
    }
}

fn load_input(
    mechanism: MechanismId,
    prefs_path: &Path,
    instance: &Instance,
) -> Result<MechanismInput, String> {
    let text = read(prefs_path)?;
    let shape_err = |e: format::FormatError| format!("{}: {e}", prefs_path.display());
    if mechanism.is_sequential() {
        Ok(MechanismInput::Sequential(
            format::parse_sequential_prefs(&text, instance).map_err(shape_err)?,
        ))
    } else if mechanism.is_subschool() {
        Ok(MechanismInput::Subschool(
            format::parse_subschool_prefs(&text, instance).map_err(shape_err)?,
        ))
    } else {
        Ok(MechanismInput::Simultaneous(
            format::parse_simultaneous_prefs(&text, instance).map_err(shape_err)?,
        ))
    }
}

fn run(
    mechanism: &str,
    instance_path: &Path,
    prefs_path: &Path,
    trace_path: Option<&Path>,
    out_path: Option<&Path>,
) -> CliResult {
    let mechanism: MechanismId = mechanism.parse().map_err(|e| format!("{e}"))?;
    let instance = load_instance(instance_path)?;
    let input = load_input(mechanism, prefs_path, &instance)?;
    let (result, trace) =
        mechanisms::run_traced(mechanism, &instance, &input).map_err(|e| e.to_string())?;
    let file = format::result_to_file(&result, None, &instance);
    write_out(out_path, &to_json(&file)?)?;
    if let Some(trace_path) = trace_path {
        let with_trace = format::result_to_file(&result, Some(&trace), &instance);
        std::fs::write(trace_path, to_json(&with_trace.trace)?)
            .map_err(|e| format!("cannot write {}: {e}", trace_path.display()))?;
    }
    Ok(0)
}

fn cutoffs(mode: ModeArg, instance_path: &Path, result_path: &Path) -> CliResult {
    let instance = load_instance(instance_path)?;
    let file: format::ResultFile = serde_json::from_str(&read(result_path)?)
        .map_err(|e| format!("{}: {e}", result_path.display()))?;
    let matching = format::entries_to_matching(&file.matching, &instance)
        .map_err(|e| format!("{}: {e}", result_path.display()))?;
    let profile = compute_cutoffs(&matching, &instance, mode.into());
    emit(&to_json(&format::cutoffs_to_file(&profile, &instance))?)?;
    Ok(0)
}

fn student_names(instance: &Instance, ids: &[StudentId]) -> Vec<String> {
    ids.iter()
        .map(|&i| instance.student(i).id.clone())
        .collect()
}

fn stability_json(report: &StabilityReport, instance: &Instance) -> serde_json::Value {
    let pair = |&(i, s): &(StudentId, SchoolId)| {
        json!({"student": instance.student(i).id, "school": instance.school(s).id})
    };
    json!({
        "stable": report.is_stable(),
        "individually_rational": report.individually_rational(),
        "unacceptable_assignments": student_names(instance, &report.unacceptable),
        "non_wasteful": report.non_wasteful(),
        "waste": report.waste.iter().map(pair).collect::<Vec<_>>(),
        "reserve_non_wasteful": report.reserve_non_wasteful(),
        "reserve_waste": report.reserve_waste.iter().map(pair).collect::<Vec<_>>(),
        "justified_envy": report.justified_envy.iter().map(|w| json!({
            "envier": instance.student(w.envier).id,
            "envied": instance.student(w.envied).id,
            "school": instance.school(w.school).id,
        })).collect::<Vec<_>>(),
    })
}

fn verdict_json(verdict: &VerificationVerdict, instance: &Instance) -> serde_json::Value {
    let school_failures: Vec<StudentId> = verdict
        .students
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.school_ok)
        .map(|(i, _)| StudentId(i as u32))
        .collect();
    json!({
        "passed": verdict.passed(),
        "school_failures": student_names(instance, &school_failures),
        "seat_failures": student_names(instance, &verdict.seat_failures()),
    })
}

fn audit_cmd(
    check: CheckArg,
    instance_path: &Path,
    prefs_path: &Path,
    result_path: &Path,
) -> CliResult {
    let instance = load_instance(instance_path)?;
    let file: format::ResultFile = serde_json::from_str(&read(result_path)?)
        .map_err(|e| format!("{}: {e}", result_path.display()))?;
    let matching = format::entries_to_matching(&file.matching, &instance)
        .map_err(|e| format!("{}: {e}", result_path.display()))?;
    let prefs_text = read(prefs_path)?;

    let (ok, witness) = match check {
        CheckArg::Stable => {
            let prefs = format::parse_simultaneous_prefs(&prefs_text, &instance)
                .map_err(|e| e.to_string())?;
            let report = audit::stability_report(&matching, &prefs, &instance);
            (report.is_stable(), stability_json(&report, &instance))
        }
        CheckArg::Ro | CheckArg::Or => {
            let prefs = format::parse_simultaneous_prefs(&prefs_text, &instance)
                .map_err(|e| e.to_string())?;
            let verdict = match check {
                CheckArg::Ro => audit::is_ro_verifiable(&matching, &prefs, &instance),
                _ => audit::is_or_verifiable(&matching, &prefs, &instance),
            };
            (verdict.passed(), verdict_json(&verdict, &instance))
        }
        CheckArg::SeqRo | CheckArg::SeqOr => {
            let (mechanism, first) = match check {
                CheckArg::SeqRo => (MechanismId::SeqRo, SeatType::Reserved),
                _ => (MechanismId::SeqOr, SeatType::Open),
            };
            if file.mechanism != mechanism.as_str() {
                return Err(format!(
                    "result file was produced by {:?}, expected {}",
                    file.mechanism, mechanism
                ));
            }
            let prefs = format::parse_sequential_prefs(&prefs_text, &instance)
                .map_err(|e| e.to_string())?;
            let stage_cutoffs = format::file_to_sequential_cutoffs(&file, &instance, mechanism)
                .map_err(|e| e.to_string())?;
            let verdict =
                audit::verify_sequential(&matching, &stage_cutoffs, &prefs, &instance, first)
                    .map_err(|e| e.to_string())?;
            (verdict.passed(), verdict_json(&verdict, &instance))
        }
    };

    emit(&to_json(&witness)?)?;
    Ok(if ok { 0 } else { 1 })
}

fn resolve_pool(
    args: &ChoiceSetArgs,
    instance: &Instance,
) -> Result<(SchoolId, BTreeSet<StudentId>), String> {
    let school = match &args.school {
        Some(name) => instance
            .find_school(name)
            .ok_or_else(|| format!("unknown school {name:?}"))?,
        None if instance.num_schools() == 1 => SchoolId(0),
        None => return Err("--school is required for multi-school instances".to_string()),
    };
    let applicants = if args.applicants.is_empty() {
        instance.all_students()
    } else {
        args.applicants
            .iter()
            .map(|name| {
                instance
                    .find_student(name)
                    .ok_or_else(|| format!("unknown student {name:?}"))
            })
            .collect::<Result<_, _>>()?
    };
    Ok((school, applicants))
}

fn selection_json(
    selection: &reserves_core::choice::ChoiceResult,
    instance: &Instance,
) -> serde_json::Value {
    json!(selection
        .seats
        .iter()
        .map(|(&i, &seat)| json!({"student": instance.student(i).id, "seat": seat}))
        .collect::<Vec<_>>())
}

fn oracle_cmd(cmd: OracleCommand) -> CliResult {
    match cmd {
        OracleCommand::StableSet(base) => {
            let instance = load_instance(&base.instance)?;
            let prefs = format::parse_simultaneous_prefs(&read(&base.prefs)?, &instance)
                .map_err(|e| e.to_string())?;
            let set = oracle::stable_set(&instance, &prefs).map_err(|e| e.to_string())?;
            let matchings: Vec<_> = set
                .iter()
                .map(|m| format::matching_to_entries(m, &instance))
                .collect();
            emit(&to_json(&json!({"count": set.len(), "matchings": matchings}))?)?;
            Ok(0)
        }
        OracleCommand::OrChoiceSet(args) => {
            let instance = load_instance(&args.instance)?;
            let (school, applicants) = resolve_pool(&args, &instance)?;
            let set = oracle::or_verifiable_choice_set(school, &applicants, &instance)
                .map_err(|e| e.to_string())?;
            emit(&to_json(&json!({
                    "count": set.len(),
                    "selections": set
                        .iter()
                        .map(|c| selection_json(c, &instance))
                        .collect::<Vec<_>>(),
                }))?)?;
            Ok(0)
        }
        OracleCommand::Ne {
            base,
            mechanism,
            jobs,
        } => {
            let mechanism: MechanismId = mechanism.parse().map_err(|e| format!("{e}"))?;
            let instance = load_instance(&base.instance)?;
            let prefs = format::parse_simultaneous_prefs(&read(&base.prefs)?, &instance)
                .map_err(|e| e.to_string())?;
            let space = oracle::StrategySpace::full_sequential(&instance);
            let result = oracle::ne_outcomes(&instance, &prefs, mechanism, &space, jobs)
                .map_err(|e| e.to_string())?;
            emit(&to_json(&json!({
                    "mechanism": mechanism.as_str(),
                    "profiles": space.profile_count().to_string(),
                    "equilibrium_profiles": result.equilibria.len(),
                    "outcomes": result.outcomes.iter().map(|o| json!({
                        "matching": format::matching_to_entries(&o.matching, &instance),
                        "stable": o.stable,
                        "wasteful": o.wasteful,
                    })).collect::<Vec<_>>(),
                }))?)?;
            Ok(0)
        }
        OracleCommand::SpAudit { base, mechanism } => {
            let mechanism: MechanismId = mechanism.parse().map_err(|e| format!("{e}"))?;
            let instance = load_instance(&base.instance)?;
            let prefs = format::parse_simultaneous_prefs(&read(&base.prefs)?, &instance)
                .map_err(|e| e.to_string())?;
            let violations = oracle::strategyproofness_audit(mechanism, &instance, &prefs)
                .map_err(|e| e.to_string())?;
            let school = |s: Option<SchoolId>| s.map(|s| instance.school(s).id.clone());
            let rows: Vec<_> = violations
                .iter()
                .map(|v| {
                    json!({
                        "student": instance.student(v.student).id,
                        "truthful_school": school(v.truthful_school),
                        "deviation_school": school(v.deviation_school),
                    })
                })
                .collect();
            emit(&to_json(&json!({"violations": rows}))?)?;
            Ok(if violations.is_empty() { 0 } else { 1 })
        }
        OracleCommand::Equivalence { base, pair } => {
            let instance = load_instance(&base.instance)?;
            let prefs = format::parse_simultaneous_prefs(&read(&base.prefs)?, &instance)
                .map_err(|e| e.to_string())?;
            let report = oracle::equivalence_check(&instance, &prefs, pair.into());
            let mismatch = report.mismatch.as_ref().map(|(left, right)| {
                json!({
                    "left": format::matching_to_entries(left, &instance),
                    "right": format::matching_to_entries(right, &instance),
                })
            });
            emit(&to_json(&json!({"holds": report.holds, "mismatch": mismatch}))?)?;
            Ok(if report.holds { 0 } else { 1 })
        }
        OracleCommand::MinReserved(args) => {
            let instance = load_instance(&args.instance)?;
            let (school, applicants) = resolve_pool(&args, &instance)?;
            let report = oracle::min_reserved_check(school, &applicants, &instance)
                .map_err(|e| e.to_string())?;
            let baseline: Vec<StudentId> = report.baseline_reserved.iter().copied().collect();
            emit(&to_json(&json!({
                    "holds": report.holds,
                    "baseline_reserved": student_names(&instance, &baseline),
                    "reserved_sizes": report.reserved_sizes,
                }))?)?;
            Ok(if report.holds { 0 } else { 1 })
        }
    }
}

fn gen_cmd(params: GenParams, out: Option<&Path>) -> CliResult {
    let raw = gen::generate(params).map_err(|e| e.to_string())?;
    write_out(out, &to_json(&raw)?)?;
    Ok(0)
}

fn fixtures_cmd(out_dir: Option<&Path>) -> CliResult {
    let bundle = fixtures::all();
    let Some(dir) = out_dir else {
        for fx in &bundle {
            emit(fx.id)?;
        }
        return Ok(0);
    };
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let write = |name: String, value: &serde_json::Value| -> Result<(), String> {
        let path = dir.join(name);
        std::fs::write(&path, to_json(value)?)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    for fx in &bundle {
        let instance = fx.instance();
        write(
            format!("{}.instance.json", fx.id),
            &serde_json::to_value(&fx.raw).map_err(|e| e.to_string())?,
        )?;
        if !fx.prefs.is_empty() {
            write(
                format!("{}.prefs.json", fx.id),
                &serde_json::to_value(&fx.prefs).map_err(|e| e.to_string())?,
            )?;
        }
        if !fx.seq_prefs.is_empty() {
            let map: serde_json::Map<String, serde_json::Value> = fx
                .seq_prefs
                .iter()
                .map(|(k, (reserve, open))| (k.clone(), json!({"reserve": reserve, "open": open})))
                .collect();
            write(
                format!("{}.seq-prefs.json", fx.id),
                &serde_json::Value::Object(map),
            )?;
        }
        if !fx.subschool_prefs.is_empty() {
            write(
                format!("{}.subschool-prefs.json", fx.id),
                &serde_json::to_value(&fx.subschool_prefs).map_err(|e| e.to_string())?,
            )?;
        }
        if let Some(golden) = fixtures::golden(fx.id, &instance) {
            write(format!("{}.golden.json", fx.id), &golden)?;
        }
    }
    println!("wrote {} fixtures to {}", bundle.len(), dir.display());
    Ok(0)
}
