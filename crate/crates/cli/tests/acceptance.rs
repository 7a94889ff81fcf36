//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ruleke_core::benchmark::{build_instance, generate_dataset};
use ruleke_core::eval::{multi_hop_accuracy, run_experiment, solve, sweep_delta, GoldAnswer, Prediction};
use ruleke_core::miner::{mine_rules, MinerConfig};
use ruleke_core::tracking::augment;
use ruleke_core::{
    fixtures, AliasTable, AugmentConfig, BenchmarkInstance, Edit, EditMemory, EntityId, ExperimentConfig, Fact, GeneratorConfig,
    HashedNgramEncoder, KbOracle, KnowledgeBase, Relation, RelationEncoder, Rule, RuleSet, Scenario, TemplateTable,
};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn encoder() -> Arc<dyn RelationEncoder> {
    Arc::new(HashedNgramEncoder::default())
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let t = started.elapsed();
    ensure!(t < limit, "took {t:?}, limit {limit:?}");
    Ok(t)
}

fn worked_example() -> Result<String, String> {
    let started = Instant::now();
    let kb = fixtures::world();
    let rules = fixtures::builtin_rules();
    let edit = Edit::new("head_of_state_is", "America", Some("Joe Biden"), "Albert Einstein");
    let oracle = KbOracle::new(&kb, &rules);
    let aug = augment(
        std::slice::from_ref(&edit),
        &rules,
        &oracle,
        encoder(),
        kb.alias_table(),
        &AugmentConfig::default(),
    );
    let lady = Fact::new("the_First_Lady_is", "America", "Elsa Einstein");
    let derived = aug
        .derived
        .iter()
        .find(|d| d.fact == lady)
        .ok_or("the_First_Lady_is(America, Elsa Einstein) not derived")?;
    ensure!(
        derived.rule.body == vec![Relation::from("head_of_state_is"), Relation::from("wife_is")],
        "derived through {}",
        derived.rule
    );
    ensure!(
        aug.memory
            .edits()
            .contains(&Edit::new("the_First_Lady_is", "America", None, "Elsa Einstein")),
        "derived fact missing from the augmented memory"
    );

    let fine: Vec<Relation> = ["head_of_state_is", "wife_is", "father_is"].map(Relation::from).to_vec();
    let inst = build_instance(
        &kb,
        &rules,
        &TemplateTable::builtin(),
        Scenario::LeftEdit,
        &"America".into(),
        &fine,
        vec![edit],
        false,
    )
    .map_err(|r| format!("instance rejected: {r:?}"))?;
    ensure!(
        inst.question_path == ["the_First_Lady_is", "father_is"].map(Relation::from),
        "question path {:?}",
        inst.question_path
    );
    let pred = solve(&inst, &aug.memory, &oracle, 0.7);
    ensure!(pred.answer == Some("Rudolf Einstein".into()), "answered {:?}", pred.answer);
    let t = within(Duration::from_secs(1), started)?;
    Ok(format!("answer Rudolf Einstein in {t:.1?}"))
}

fn fig1() -> Result<String, String> {
    let kb = KnowledgeBase::from_facts(
        [
            Fact::new("company_is", "Tom", "Amazon"),
            Fact::new("owner_is", "Amazon", "Jeff Bezos"),
            Fact::new("owner_is", "Twitter", "Jack Dorsey"),
        ],
        AliasTable::new(),
    );
    let rule = Rule::new("boss_is", &["company_is", "owner_is"], 1.0).map_err(|e| e.to_string())?;
    let rules = RuleSet::new(vec![rule.clone()]).map_err(|e| e.to_string())?;
    let edits = vec![
        Edit::new("company_is", "Tom", Some("Amazon"), "Twitter"),
        Edit::new("owner_is", "Twitter", Some("Jeff Bezos"), "Elon Musk"),
    ];
    let oracle = KbOracle::new(&kb, &rules);
    let aug = augment(
        &edits,
        &rules,
        &oracle,
        encoder(),
        kb.alias_table(),
        &AugmentConfig::default(),
    );
    let boss = Edit::new("boss_is", "Tom", None, "Elon Musk");
    ensure!(aug.memory.edits().contains(&boss), "augmented memory lacks {boss}");
    ensure!(
        aug.memory.edits().iter().filter(|e| e.relation == boss.relation).count() == 1,
        "more than one boss_is edit"
    );

    let inst = BenchmarkInstance {
        id: "fig1".into(),
        scenario: Scenario::BothEdit,
        start: "Tom".into(),
        question_path: vec!["boss_is".into()],
        fine_path: rule.body.clone(),
        fine_entities: vec!["Tom".into(), "Twitter".into(), "Elon Musk".into()],
        rule,
        rule_offset: 0,
        edits: edits.clone(),
        gold_answer: "Elon Musk".into(),
        gold_aliases: BTreeSet::new(),
        stale_answer: Some("Jeff Bezos".into()),
        hops: 1,
        rendered_question: "Who is Tom's boss?".into(),
    };
    let plain = EditMemory::with_edits(encoder(), kb.alias_table(), edits);
    let mut answers = Vec::new();
    for _ in 0..3 {
        let base = solve(&inst, &plain, &oracle, 0.7).answer;
        let augmented = solve(&inst, &aug.memory, &oracle, 0.7).answer;
        answers.push((base, augmented));
    }
    ensure!(answers.windows(2).all(|w| w[0] == w[1]), "answers vary between runs");
    ensure!(
        answers[0].0 == Some("Jeff Bezos".into()),
        "baseline answered {:?}",
        answers[0].0
    );
    ensure!(
        answers[0].1 == Some("Elon Musk".into()),
        "augmented answered {:?}",
        answers[0].1
    );
    Ok("baseline Jeff Bezos, augmented Elon Musk".into())
}

fn accuracy_map(report: &ruleke_core::ExperimentReport) -> BTreeMap<Scenario, f64> {
    report.per_scenario.iter().map(|(s, a)| (*s, a.accuracy)).collect()
}

fn scenario_separation() -> Result<String, String> {
    let started = Instant::now();
    let kb = fixtures::world();
    let rules = fixtures::builtin_rules();
    let cfg = GeneratorConfig::default();
    let data = generate_dataset(&kb, &rules, &TemplateTable::builtin(), &cfg);
    ensure!(
        data.instances.len() == 200,
        "generated {} instances: {:?}",
        data.instances.len(),
        data.warnings
    );
    let base_cfg = ExperimentConfig {
        augmented: false,
        ..Default::default()
    };
    let (base, _) = run_experiment(&data.instances, &kb, &rules, encoder(), &base_cfg);
    let (aug, _) = run_experiment(&data.instances, &kb, &rules, encoder(), &ExperimentConfig::default());
    let (b, a) = (accuracy_map(&base), accuracy_map(&aug));
    for s in Scenario::ALL {
        let want_base = if s == Scenario::NoEdit { 1.0 } else { 0.0 };
        ensure!(
            b.get(&s) == Some(&want_base),
            "baseline {s}: {:?}, expected {want_base}",
            b.get(&s)
        );
        ensure!(a.get(&s) == Some(&1.0), "augmented {s}: {:?}, expected 1.0", a.get(&s));
    }
    let t = within(Duration::from_secs(60), started)?;
    Ok(format!("baseline {b:?}, augmented all 1.0, in {t:.1?}"))
}

fn ambiguity() -> Result<String, String> {
    let kb = fixtures::world();
    let rules = fixtures::builtin_rules();
    let cfg = GeneratorConfig {
        allow_ambiguous: true,
        ..Default::default()
    };
    let data = generate_dataset(&kb, &rules, &TemplateTable::builtin(), &cfg);
    let (report, _) = run_experiment(&data.instances, &kb, &rules, encoder(), &ExperimentConfig::default());
    let right: Vec<BenchmarkInstance> = data
        .instances
        .iter()
        .filter(|i| i.scenario == Scenario::RightEdit)
        .cloned()
        .collect();
    let (right_only, _) = run_experiment(&right, &kb, &rules, encoder(), &ExperimentConfig::default());
    ensure!(
        right_only.augment.ambiguous_inverses > 0,
        "no AmbiguousInverse recorded on Right-Edit instances"
    );
    let acc = accuracy_map(&report);
    let (l, r) = (acc[&Scenario::LeftEdit], acc[&Scenario::RightEdit]);
    ensure!(r < l, "Right-Edit accuracy {r} not below Left-Edit {l}");
    Ok(format!(
        "Right-Edit {r:.3} < Left-Edit {l:.3}; {} ambiguous inverses on Right-Edit",
        right_only.augment.ambiguous_inverses
    ))
}

fn delta_sweep() -> Result<String, String> {
    let started = Instant::now();
    let kb = fixtures::world();
    let rules = fixtures::builtin_rules();
    let data = generate_dataset(&kb, &rules, &TemplateTable::builtin(), &GeneratorConfig::default());
    let deltas = [0.0, 0.4, 0.8, 1.0, 1.1];
    let rows = sweep_delta(&data.instances, &kb, &rules, encoder(), &deltas, &ExperimentConfig::default());
    ensure!(rows.len() == deltas.len(), "{} rows", rows.len());
    ensure!(
        rows.windows(2).all(|w| w[1].growth_ratio <= w[0].growth_ratio),
        "growth ratio increases somewhere: {rows:?}"
    );
    let last = rows.last().expect("rows");
    ensure!(last.growth_ratio == 1.0, "growth at 1.1 is {}", last.growth_ratio);
    ensure!(
        last.accuracy == last.baseline_accuracy,
        "accuracy at 1.1 is {} vs baseline {}",
        last.accuracy,
        last.baseline_accuracy
    );
    let t = within(Duration::from_secs(300), started)?;
    let growth: Vec<String> = rows.iter().map(|r| format!("{}:{:.2}", r.delta, r.growth_ratio)).collect();
    Ok(format!("growth {}, in {t:.1?}", growth.join(" ")))
}

type RuleTuple = (Relation, Relation, Relation, f64);

/// Nested loops over the fact list, no indexes.
fn reference_mine(kb: &KnowledgeBase, cfg: &MinerConfig) -> Vec<RuleTuple> {
    let facts: Vec<&Fact> = kb.facts().iter().collect();
    let relations: Vec<&Relation> = kb.relations().collect();
    let mut body: HashMap<(Relation, Relation), usize> = HashMap::new();
    let mut support: HashMap<(Relation, Relation, Relation), usize> = HashMap::new();
    for f1 in &facts {
        for f2 in &facts {
            if f1.object != f2.subject {
                continue;
            }
            *body.entry((f1.relation.clone(), f2.relation.clone())).or_default() += 1;
            for r3 in &relations {
                let head = Fact::new((*r3).clone(), f1.subject.clone(), f2.object.clone());
                if facts.iter().any(|f| **f == head) {
                    *support
                        .entry((f1.relation.clone(), f2.relation.clone(), (*r3).clone()))
                        .or_default() += 1;
                }
            }
        }
    }
    let mut out: Vec<RuleTuple> = support
        .into_iter()
        .filter_map(|((r1, r2, r3), s)| {
            let conf = s as f64 / body[&(r1.clone(), r2.clone())] as f64;
            (s >= cfg.min_support_count && conf >= cfg.min_confidence).then_some((r1, r2, r3, conf))
        })
        .collect();
    out.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
    out
}

fn random_kb(rng: &mut ChaCha8Rng, facts: std::ops::RangeInclusive<usize>) -> KnowledgeBase {
    let n_entities = rng.gen_range(3..60);
    let n_relations = rng.gen_range(1..7);
    let n_facts = rng.gen_range(facts);
    let facts: Vec<Fact> = (0..n_facts)
        .map(|_| {
            Fact::new(
                format!("r{}", rng.gen_range(0..n_relations)).as_str(),
                format!("e{}", rng.gen_range(0..n_entities)).as_str(),
                format!("e{}", rng.gen_range(0..n_entities)).as_str(),
            )
        })
        .collect();
    KnowledgeBase::from_facts(facts, AliasTable::new())
}

fn miner_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sizes = Vec::new();
    for case in 0..50 {
        // Mostly small graphs; every tenth one near the size cap.
        let range = if case % 10 == 9 { 1500..=2000 } else { 0..=300 };
        let kb = random_kb(&mut rng, range);
        let cfg = MinerConfig {
            min_support_count: rng.gen_range(1..4),
            min_confidence: rng.gen_range(0.0..0.8),
        };
        let mut got: Vec<RuleTuple> = mine_rules(&kb, &cfg)
            .iter()
            .map(|r| (r.body[0].clone(), r.body[1].clone(), r.head.clone(), r.support))
            .collect();
        got.sort_by(|a, b| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)));
        let want = reference_mine(&kb, &cfg);
        ensure!(
            got.len() == want.len(),
            "case {case}: {} rules vs {} reference",
            got.len(),
            want.len()
        );
        for (g, w) in got.iter().zip(&want) {
            ensure!((&g.0, &g.1, &g.2) == (&w.0, &w.1, &w.2), "case {case}: {g:?} vs {w:?}");
            ensure!((g.3 - w.3).abs() <= 1e-12, "case {case}: support {} vs {}", g.3, w.3);
        }
        sizes.push(kb.len());
    }

    let world = fixtures::world();
    let mined = mine_rules(&world, &MinerConfig::default());
    for seeded in fixtures::builtin_rules().iter() {
        let found = mined
            .find(&seeded.head, &seeded.body)
            .ok_or_else(|| format!("{seeded} not recovered"))?;
        ensure!(found.support >= 0.9, "{seeded} recovered with confidence {}", found.support);
    }
    Ok(format!(
        "50 random graphs (largest {} facts) match; all 17 seeded rules recovered from {} mined",
        sizes.iter().max().unwrap_or(&0),
        mined.len()
    ))
}

/// Linear scan over every edit, alias-aware, first maximum wins.
fn reference_retrieve(
    mem: &EditMemory,
    entity: &EntityId,
    relation: &Relation,
    theta: f64,
    backward: bool,
) -> Option<(usize, f64)> {
    let names = mem.aliases().expand(entity.as_str());
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in mem.edits().iter().enumerate() {
        let key = if backward { &e.new_object } else { &e.subject };
        if mem.aliases().expand(key.as_str()).is_disjoint(&names) {
            continue;
        }
        let eta = mem.encoder().similarity(&e.relation, relation);
        if best.is_none_or(|(_, b)| eta > b) {
            best = Some((i, eta));
        }
    }
    best.filter(|(_, eta)| *eta > theta)
}

const RELATIONS: [&str; 12] = [
    "father_is",
    "mother_is",
    "grandmother_is",
    "grandfather_is",
    "brother_is",
    "company_is",
    "owner_is",
    "boss_is",
    "live_in_the_place",
    "born_in_the_place",
    "head_of_state_is",
    "the_First_Lady_is",
];

fn retrieval_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hits = 0;
    for case in 0..1000 {
        let n_entities = rng.gen_range(2..30);
        let mut aliases = AliasTable::new();
        for i in 0..n_entities.min(4) {
            aliases
                .insert(&format!("e{i}").as_str().into(), &format!("alias{i}"))
                .map_err(|e| e.to_string())?;
        }
        let entity = |rng: &mut ChaCha8Rng| -> EntityId {
            let i = rng.gen_range(0..n_entities);
            if i < 4 && rng.gen_bool(0.3) {
                format!("alias{i}").as_str().into()
            } else {
                format!("e{i}").as_str().into()
            }
        };
        let n = rng.gen_range(0..=500);
        let edits: Vec<Edit> = (0..n)
            .map(|_| {
                let rel = RELATIONS[rng.gen_range(0..RELATIONS.len())];
                let s = entity(&mut rng);
                let o = entity(&mut rng);
                let old = rng.gen_bool(0.5).then(|| "old".to_string());
                Edit::new(rel, s.as_str(), old.as_deref(), o.as_str())
            })
            .collect();
        let mem = EditMemory::with_edits(encoder(), Arc::new(aliases), edits);
        let query = entity(&mut rng);
        let rel: Relation = RELATIONS[rng.gen_range(0..RELATIONS.len())].into();
        let theta = [0.0, 0.5, 0.7, 0.9][rng.gen_range(0..4)];
        for backward in [false, true] {
            let got = if backward {
                mem.retrieve_backward(&query, &rel, theta)
            } else {
                mem.retrieve_forward(&query, &rel, theta)
            }
            .map(|h| (h.index, h.similarity));
            let want = reference_retrieve(&mem, &query, &rel, theta, backward);
            ensure!(got == want, "case {case} backward={backward}: {got:?} vs reference {want:?}");
            hits += usize::from(got.is_some());
        }
    }
    Ok(format!("1000 cases x 2 directions agree ({hits} hits)"))
}

fn metric_golden() -> Result<String, String> {
    let gold = |id: &str, answer: &str, aliases: &[&str]| GoldAnswer {
        id: id.into(),
        answer: answer.into(),
        aliases: aliases.iter().map(|a| a.to_string()).collect(),
    };
    let pred = |id: &str, answer: Option<&str>| Prediction {
        id: id.into(),
        answer: answer.map(EntityId::from),
        hop_trace: Vec::new(),
    };
    let golds = vec![
        gold("q1", "United States", &["USA", "America"]),
        gold("q2", "Paris", &[]),
        gold("q3", "Elon Musk", &[]),
        gold("q4", "Rudolf Einstein", &[]),
        gold("q5", "Berlin", &[]),
    ];
    let preds = vec![
        // alias hit
        pred("q1", Some("USA")),
        // three variants, one right
        pred("q2", Some("Lyon")),
        pred("q2", Some("Paris")),
        pred("q2", None),
        pred("q3", Some("Jeff Bezos")),
        pred("q4", None),
        pred("q5", Some("Berlin")),
    ];
    // q1, q2 and q5 are correct.
    let score = multi_hop_accuracy(&preds, &golds).map_err(|e| e.to_string())?;
    ensure!(score == 3.0 / 5.0, "score {score}, expected 0.6");

    // Same group with all three variants wrong, and q1 answered by its canonical name.
    let mut preds2 = preds.clone();
    preds2[0] = pred("q1", Some("United States"));
    preds2[2] = pred("q2", Some("Marseille"));
    let score2 = multi_hop_accuracy(&preds2, &golds).map_err(|e| e.to_string())?;
    ensure!(score2 == 2.0 / 5.0, "score {score2}, expected 0.4");

    let nulls: Vec<Prediction> = golds.iter().map(|g| pred(&g.id, None)).collect();
    let zero = multi_hop_accuracy(&nulls, &golds).map_err(|e| e.to_string())?;
    ensure!(zero == 0.0, "all-null score {zero}");
    ensure!(multi_hop_accuracy(&preds[..1], &golds).is_err(), "missing ids accepted");
    Ok("0.6, 0.4 and 0.0 on the golden fixtures".into())
}

fn ruleke(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ruleke"))
        .args(args)
        .current_dir(dir)
        .env_remove("RULEKE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "ruleke {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn determinism() -> Result<String, String> {
    const FILES: [&str; 5] = ["dataset.jsonl", "stats.tsv", "report.json", "report.csv", "predictions.jsonl"];
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        ruleke(
            dir.path(),
            &[
                "-q",
                "--jobs",
                jobs,
                "gen-bench",
                "--seed",
                "0",
                "--counts",
                "20,20,20,20",
                "--out",
                "dataset.jsonl",
                "--stats-out",
                "stats.tsv",
            ],
        )?;
        ruleke(
            dir.path(),
            &[
                "-q",
                "--jobs",
                jobs,
                "eval",
                "--dataset",
                "dataset.jsonl",
                "--compare",
                "--batch",
                "all",
                "--seed",
                "0",
                "--report",
                "report.json",
                "--csv",
                "report.csv",
                "--predictions",
                "predictions.jsonl",
            ],
        )?;
        let contents: Vec<Vec<u8>> = FILES
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).map_err(|e| format!("{f}: {e}")))
            .collect::<Result<_, _>>()?;
        runs.push(contents);
    }
    for (i, f) in FILES.iter().enumerate() {
        ensure!(!runs[0][i].is_empty(), "{f} is empty");
        ensure!(runs[0][i] == runs[1][i], "{f} differs between runs");
    }
    Ok(format!("{} output files byte-identical across two runs", FILES.len()))
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("worked example", worked_example),
        ("two-edit composition", fig1),
        ("scenario separation", scenario_separation),
        ("many-to-one ambiguity", ambiguity),
        ("delta sweep", delta_sweep),
        ("miner reference", miner_equivalence),
        ("retrieval reference", retrieval_equivalence),
        ("metric fixture", metric_golden),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
