//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Pinned tolerances:
//! - determinism: byte equality; end-to-end wall time < 5 s
//! - baseline: analytic within 1e-12 of 1/3; Monte Carlo (100k trials) within 0.01; < 2 s
//! - rank correlation: 1e-9
//! - micro-F1 vs accuracy: exact equality

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use domwsd::domain_labelling::{GlossLabeller, HintsMode};
use domwsd::eval::spearman_rho;
use domwsd::lexicon::{self, strip_hints, Lexicon, Pos, SynsetId, WsdInstance};
use domwsd::pipeline::{self, RunManifest, RunOptions, PREDICTIONS_FILE, REPORT_FILE};
use domwsd::prompts::{self, PromptTemplate};
use domwsd::scoring::{FixtureBackend, FixtureEntry, Scorer};
use domwsd::wsd::{self, Disambiguator};
use domwsd::{DomainInventory, DomainLabel, GlossLabelInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn run_manifest(name: &str, out: &Path, workers: usize) -> Result<(Vec<u8>, Vec<u8>, usize), String> {
    let mut m = RunManifest::load(data(name)).map_err(err)?;
    m.output_dir = out.to_path_buf();
    let outcome = pipeline::execute(&m, &RunOptions { workers, endpoint: None }).map_err(err)?;
    let preds = fs::read(out.join(PREDICTIONS_FILE)).map_err(err)?;
    let report = fs::read(out.join(REPORT_FILE)).map_err(err)?;
    Ok((preds, report, outcome.metadata.scorer_dispatches))
}

const MANIFESTS: [&str; 4] = [
    "synthetic/wsd_word.json",
    "synthetic/wsd_sentence.json",
    "synthetic/dl_with_hints.json",
    "synthetic/dl_without_hints.json",
];

fn synthetic_corpus() -> Result<(Lexicon, Vec<WsdInstance>, Vec<GlossLabelInstance>, DomainInventory), String> {
    let lex = Lexicon::load(data("synthetic/lexicon.tsv")).map_err(err)?;
    let wsd = lexicon::load_wsd_dataset(data("synthetic/wsd.jsonl"), &lex).map_err(err)?;
    let gloss = lexicon::load_gloss_dataset(data("synthetic/gloss.jsonl")).map_err(err)?;
    let inv = DomainInventory::load(data("synthetic/inventory.tsv"), "synthetic", None).map_err(err)?;
    Ok((lex, wsd, gloss, inv))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let (_, wsd, gloss, inv) = synthetic_corpus()?;
    ensure!(wsd.len() >= 20, "only {} WSD instances", wsd.len());
    ensure!(gloss.len() >= 10, "only {} gloss instances", gloss.len());
    ensure!(inv.labels().len() == 3, "{} labels, expected 3", inv.labels().len());
    let tmp = tempfile::tempdir().map_err(err)?;
    for name in MANIFESTS {
        let stem = Path::new(name).file_stem().unwrap().to_string_lossy().into_owned();
        let a = run_manifest(name, &tmp.path().join(format!("{stem}-a")), 1)?;
        let b = run_manifest(name, &tmp.path().join(format!("{stem}-b")), 1)?;
        let c = run_manifest(name, &tmp.path().join(format!("{stem}-c")), 8)?;
        ensure!(a.0 == b.0 && a.1 == b.1, "{name}: two runs differ");
        ensure!(a.0 == c.0 && a.1 == c.1, "{name}: workers 1 and 8 differ");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{} manifests ({} WSD, {} gloss instances, 3 labels) byte-identical across 2 runs and workers 1/8 in {:.2?}",
        MANIFESTS.len(),
        wsd.len(),
        gloss.len(),
        elapsed
    ))
}

/// Scores on a coarse grid so ties are common.
fn grid_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..=20) as f64 / 20.0).collect()
}

/// A random strictly increasing map of [0, 1] into [0, 1].
fn monotone(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let p = rng.random_range(0.3..4.0);
    let c: f64 = rng.random_range(0.5..6.0);
    let lo = rng.random_range(0.0..0.3);
    let hi = rng.random_range(0.7..1.0);
    move |x: f64| lo + (hi - lo) * (((c * x.powf(p)).exp() - 1.0) / (c.exp() - 1.0))
}

fn fixture_scorer(premise: &str, hyps: &[String], scores: &[f64]) -> Scorer {
    let entries = hyps.iter().zip(scores).map(|(h, &p)| FixtureEntry {
        premise: premise.into(),
        hypothesis: h.clone(),
        probability: p,
        mode: None,
    });
    Scorer::new(Box::new(FixtureBackend::from_entries("acceptance", entries).unwrap()), 64)
}

fn argmax_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let wsd_t = prompts::find_template("wsd_word", &[]).map_err(err)?;
    let dl_t = prompts::find_template("dl_sentence", &[]).map_err(err)?;
    let hyps = |t: &PromptTemplate, labels: &[DomainLabel], word: Option<&str>| -> Vec<String> {
        prompts::generate_hypotheses(t, labels, word).unwrap().into_iter().map(|h| h.text).collect()
    };
    let mut changed = 0;
    for trial in 0..1000 {
        let k = rng.random_range(2..=8);
        let labels: Vec<DomainLabel> = (0..k).map(|i| DomainLabel::new(&format!("L{i:02}")).unwrap()).collect();
        let tsv: String = (0..k).map(|i| format!("{:08}-n\tL{i:02}\n", i + 1)).collect();
        let inv = DomainInventory::parse("r", &tsv, None).map_err(err)?;
        let scores = grid_scores(&mut rng, k);
        let f = monotone(&mut rng);
        let mapped: Vec<f64> = scores.iter().map(|&s| f(s)).collect();

        let context = format!("context {trial}");
        let inst = WsdInstance {
            instance_id: format!("r{trial}"),
            lemma: "w".into(),
            pos: Pos::Noun,
            context: context.clone(),
            target_span: (0, 1),
            gold_senses: vec![SynsetId::new(1, Pos::Noun).unwrap()],
            candidate_senses: (1..=k as u32).map(|o| SynsetId::new(o, Pos::Noun).unwrap()).collect(),
        };
        let h = hyps(&wsd_t, &labels, Some("w"));
        let p1 = Disambiguator::new(&inv, &wsd_t, &fixture_scorer(&context, &h, &scores))
            .disambiguate(&inst)
            .map_err(err)?;
        let p2 = Disambiguator::new(&inv, &wsd_t, &fixture_scorer(&context, &h, &mapped))
            .disambiguate(&inst)
            .map_err(err)?;
        changed += (p1.predicted_domain != p2.predicted_domain) as usize;

        let gloss = GlossLabelInstance {
            synset: SynsetId::new(1, Pos::Noun).unwrap(),
            gloss: context.clone(),
            gold: [("r".to_string(), vec!["L00".to_string()])].into(),
        };
        let h = hyps(&dl_t, &labels, None);
        let d1 = GlossLabeller::new(&inv, &dl_t, &fixture_scorer(&context, &h, &scores), HintsMode::WithHints)
            .label_gloss(&gloss)
            .map_err(err)?;
        let d2 = GlossLabeller::new(&inv, &dl_t, &fixture_scorer(&context, &h, &mapped), HintsMode::WithHints)
            .label_gloss(&gloss)
            .map_err(err)?;
        changed += (d1.predicted_label != d2.predicted_label) as usize;
    }
    ensure!(changed == 0, "{changed} predictions changed");
    Ok("1000 random score maps x random increasing transforms: 0 changed predictions (wsd and domain labelling)".into())
}

fn granularity() -> Outcome {
    let mut checked = 0;
    let (_, wsd, _, inv) = synthetic_corpus()?;
    let cell_lex = Lexicon::load(data("cell/lexicon.tsv")).map_err(err)?;
    let cell = lexicon::load_wsd_dataset(data("cell/wsd.jsonl"), &cell_lex).map_err(err)?;
    let mut sets: Vec<(&[WsdInstance], DomainInventory)> = vec![(&wsd, inv)];
    for (file, name) in [("cell/csi.tsv", "csi"), ("cell/babeldomains.tsv", "babeldomains")] {
        sets.push((&cell, DomainInventory::load(data(file), name, None).map_err(err)?));
    }
    for (dataset, inv) in &sets {
        for inst in dataset.iter() {
            let d = inv
                .candidate_domains(&inst.lemma, &inst.candidate_senses)
                .map_err(err)?;
            ensure!(
                d.domains.len() <= inst.candidate_senses.len(),
                "{} under {}: |D|={} > |S|={}",
                inst.instance_id,
                inv.name(),
                d.domains.len(),
                inst.candidate_senses.len()
            );
            checked += 1;
        }
    }
    let csi = &sets[1].1;
    let senses: Vec<SynsetId> = cell_lex.senses_of("cell", Pos::Noun).iter().map(|s| s.id).collect();
    let d = csi.candidate_domains("cell", &senses).map_err(err)?;
    ensure!(
        d.domains.len() == 2 && senses.len() == 3,
        "cell under csi: |D|={} |S|={}",
        d.domains.len(),
        senses.len()
    );
    Ok(format!(
        "|D^w| <= |S^w| on {checked} instances over single-label inventories; cell under CSI: |D^w|=2 < |S^w|=3"
    ))
}

fn random_baseline() -> Outcome {
    let start = Instant::now();
    let lex = Lexicon::load(data("baseline/lexicon.tsv")).map_err(err)?;
    let ds = lexicon::load_wsd_dataset(data("baseline/wsd.jsonl"), &lex).map_err(err)?;
    let inv = DomainInventory::load(data("baseline/inventory.tsv"), "baseline", None).map_err(err)?;
    let analytic = wsd::random_baseline_analytic(&ds, &inv).map_err(err)?;
    ensure!((analytic - 1.0 / 3.0).abs() < 1e-12, "analytic {analytic}");
    let mc = wsd::random_baseline_mc(&ds, &inv, 20230601, 100_000).map_err(err)?;
    ensure!((mc.accuracy - analytic).abs() <= 0.01, "monte carlo {} vs {analytic}", mc.accuracy);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!(
        "analytic {analytic:.6}; monte carlo {:.6} (100k trials, se {:.6}) within 0.01; {:.2?}",
        mc.accuracy, mc.std_error, elapsed
    ))
}

fn metric_identities() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut runs = 0;
    for name in MANIFESTS {
        let out = tmp.path().join(runs.to_string());
        run_manifest(name, &out, 2)?;
        let report: domwsd::EvalReport = pipeline::read_json(&out.join(REPORT_FILE)).map_err(err)?;
        ensure!(
            report.micro_f1 == report.correct as f64 / report.n_instances as f64,
            "{name}: micro-F1 {} != accuracy",
            report.micro_f1
        );
        if !report.per_pos.is_empty() {
            let total: usize = report.per_pos.values().map(|p| p.total).sum();
            let correct: usize = report.per_pos.values().map(|p| p.correct).sum();
            ensure!(total == report.n_instances, "{name}: per-POS totals {total}");
            ensure!(correct == report.correct, "{name}: per-POS correct {correct}");
        }
        let support: usize = report.per_label.values().map(|l| l.support).sum();
        ensure!(support == report.n_instances, "{name}: label supports sum to {support}");
        runs += 1;
    }
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
    // Rank-difference formula on untied ranks.
    let d2: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum();
    let oracle = 1.0 - 6.0 * d2 / (5.0 * 24.0);
    let rho = spearman_rho(&xs, &ys).map_err(err)?;
    ensure!((rho - oracle).abs() < 1e-9, "rho {rho} vs oracle {oracle}");
    ensure!((spearman_rho(&xs, &xs).map_err(err)? - 1.0).abs() < 1e-9, "identical != 1");
    let rev: Vec<f64> = xs.iter().rev().copied().collect();
    ensure!((spearman_rho(&xs, &rev).map_err(err)? + 1.0).abs() < 1e-9, "reversed != -1");
    Ok(format!(
        "micro-F1 == accuracy and per-POS/label sums on {runs} runs; rho([1..5],[2,1,4,3,5]) = {rho:.9} \
         (oracle 1 - 6*{d2}/120 = {oracle}); identical 1.0, reversed -1.0"
    ))
}

/// Parent map read straight from a hierarchy file, for an independent check.
fn parent_map(path: &Path) -> Result<HashMap<String, Option<String>>, String> {
    let text = fs::read_to_string(path).map_err(err)?;
    let mut m = HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let (c, p) = line.split_once('\t').ok_or("bad hierarchy line")?;
        let p = p.trim();
        m.insert(c.trim().to_string(), (p != "-").then(|| p.to_string()));
        if p != "-" {
            m.entry(p.to_string()).or_insert(None);
        }
    }
    Ok(m)
}

fn chain(parents: &HashMap<String, Option<String>>, label: &str) -> Vec<String> {
    let mut out = vec![label.to_string()];
    while let Some(Some(p)) = parents.get(out.last().unwrap()) {
        out.push(p.clone());
    }
    out.reverse();
    out
}

fn truncation() -> Outcome {
    let hier = data("hierarchy/hierarchy.tsv");
    let inv = DomainInventory::load(data("hierarchy/assignments.tsv"), "h", Some(&hier)).map_err(err)?;
    let parents = parent_map(&hier)?;
    let max = parents.keys().map(|l| chain(&parents, l).len()).max().unwrap_or(0);
    ensure!(max == 4, "hierarchy has {max} levels, expected 4");
    let t = inv.truncate_hierarchy(3).map_err(err)?;
    let mut remapped = 0;
    for (synset, labels) in inv.assignments() {
        let mut expected: Vec<String> = Vec::new();
        for l in labels {
            let path = chain(&parents, l.as_str());
            let kept = path[..path.len().min(3)].last().unwrap().clone();
            remapped += (path.len() > 3) as usize;
            if !expected.contains(&kept) {
                expected.push(kept);
            }
        }
        let got: Vec<String> = t.domains_of_sense(synset).iter().map(|l| l.to_string()).collect();
        ensure!(got == expected, "{synset}: {got:?} != {expected:?}");
    }
    ensure!(
        t.labels().iter().all(|l| chain(&parents, l.as_str()).len() <= 3),
        "labels deeper than 3 survive"
    );
    let again = t.truncate_hierarchy(3).map_err(err)?;
    ensure!(again == t, "truncation is not idempotent");
    let mut msg = format!(
        "{} synsets checked exhaustively, {remapped} deep assignments remapped, {} -> {} labels, idempotent",
        inv.assignments().len(),
        inv.labels().len(),
        t.labels().len()
    );
    match (std::env::var_os("DOMWSD_WND_ASSIGNMENTS"), std::env::var_os("DOMWSD_WND_HIERARCHY")) {
        (Some(a), Some(h)) => {
            let wnd = DomainInventory::load(&a, "wndomains", Some(Path::new(&h))).map_err(err)?;
            let n = wnd.truncate_hierarchy(3).map_err(err)?.labels().len();
            msg.push_str(&format!("; WordNet Domains at depth 3: {n} labels (reference 60)"));
        }
        _ => msg.push_str("; WordNet Domains files not supplied"),
    }
    Ok(msg)
}

fn hint_stripping() -> Outcome {
    let lex = Lexicon::load(data("cell/lexicon.tsv")).map_err(err)?;
    let id: SynsetId = "00006484-n".parse().map_err(err)?;
    let gloss = &lex.get(&id).ok_or("cell synset missing")?.gloss;
    let stripped = strip_hints(gloss);
    let want = "the basic structural and functional unit of all organisms; ...";
    ensure!(stripped == want, "got {stripped:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let alphabet: Vec<char> = "()  ab(c)x;.é\t".chars().collect();
    for i in 0..10_000 {
        let len = rng.random_range(0..24);
        let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let once = strip_hints(&s);
        ensure!(strip_hints(&once) == once, "not idempotent on string {i}: {s:?}");
    }
    Ok(format!("{gloss:?} -> {stripped:?}; idempotent on 10k random strings"))
}

fn cache() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut lines = Vec::new();
    for name in ["synthetic/wsd_word.json", "synthetic/dl_without_hints.json"] {
        let out = tmp.path().join(Path::new(name).file_stem().unwrap());
        let cold = run_manifest(name, &out, 4)?;
        let warm = run_manifest(name, &out, 4)?;
        ensure!(cold.2 > 0, "{name}: cold run dispatched nothing");
        ensure!(warm.2 == 0, "{name}: warm run dispatched {}", warm.2);
        ensure!(cold.0 == warm.0 && cold.1 == warm.1, "{name}: warm outputs differ");
        lines.push(format!("{} cold -> 0 warm", cold.2));
    }
    Ok(format!("identical outputs; dispatches {}", lines.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fixture determinism", determinism),
        ("argmax invariance", argmax_invariance),
        ("granularity reduction", granularity),
        ("random baseline oracle", random_baseline),
        ("metric identities", metric_identities),
        ("hierarchy truncation", truncation),
        ("hint stripping", hint_stripping),
        ("cache correctness", cache),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut results = BTreeMap::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} [{}/{}] {name}: {detail}", i + 1, criteria.len());
        results.insert(i, outcome.is_ok());
    }
    let failed = results.values().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
