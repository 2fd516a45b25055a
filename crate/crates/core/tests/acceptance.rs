//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report lines are always printed.
//! Everything here is offline: fixtures come from `tests/fixtures` and model
//! services are replaced by caches.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use genqa_core::dataset::{Passage, QaExample};
use genqa_core::factuality::{human_agreement, load_annotations, ExampleVerdict};
use genqa_core::inference::{CachedGeneration, GenerationCache};
use genqa_core::metrics::{
    answerability_f1, bleu, meteor, rouge_l, rouge_l_single, tokenize, MetricConfig, MeteorParams,
};
use genqa_core::mst::{build_mixed_corpus, write_corpus, CorpusSource, MixMode, MixPolicy, CORPUS_FILE};
use genqa_core::pipeline::{cmd_evaluate, PipelineConfig};
use genqa_core::ranking::{
    apply_config, argsort_desc, ranking_agreement, top_k_accuracy, RankedConfig, RankingScores, ScoreTable,
};
use genqa_core::seqcodec::{
    encode_source, encode_target, parse_generated, roundtrip_check, Markup, SourceSequence, StyleTag,
    TargetSequence,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let started = Instant::now();
        let outcome = f();
        let elapsed = started.elapsed();
        let outcome = outcome.and_then(|()| {
            if elapsed <= budget {
                Ok(())
            } else {
                Err(format!("took {elapsed:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(()) => println!("PASS  {name}  ({:.1} ms)", elapsed.as_secs_f64() * 1e3),
            Err(msg) => {
                self.failures += 1;
                println!("FAIL  {name}  ({:.1} ms): {msg}", elapsed.as_secs_f64() * 1e3);
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn toks(s: &str) -> Vec<String> {
    tokenize(s, &MetricConfig::default())
}

fn pct2(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

const WORDS: &[&str] = &[
    "the", "six", "terminals", "p0:", "p12:", "p", "p1", "q:", "No", "Answer", "Present.", "2,662",
    "<a>", "東京", "café", "\u{2014}", "p01:", "answer:", "s:conv", "JFK", ".", "p3:x",
];

fn starts_with_index_token(answer: &str) -> bool {
    let first = answer.split_whitespace().next().unwrap_or("");
    let Some(digits) = first.strip_prefix('p').and_then(|r| r.strip_suffix(':')) else {
        return false;
    };
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn codec_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut accepted = 0;
    while accepted < 1000 {
        let n = rng.gen_range(0..=10);
        let mut ranking: Vec<usize> = (0..n).collect();
        ranking.shuffle(&mut rng);
        let len = rng.gen_range(1..=6);
        let answer = (0..len)
            .map(|_| *WORDS.choose(&mut rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        if starts_with_index_token(&answer) {
            continue;
        }
        let t = TargetSequence::new(ranking, answer);
        if !roundtrip_check(&t) {
            let encoded = encode_target(&t).map_err(|e| e.to_string())?;
            return Err(format!("round trip failed for {encoded:?}"));
        }
        accepted += 1;
    }
    Ok(())
}

fn source_grammar() -> Outcome {
    let s = SourceSequence::new(StyleTag::Conv, "q", vec!["p0".into(), "p1".into(), "p2".into()]);
    let got = encode_source(&s).map_err(|e| e.to_string())?;
    ensure(got == "s:conv </s> q: q </s> p0: p0 </s> p1: p1 </s> p2: p2 </s>", || format!("source {got:?}"))?;

    let s = SourceSequence::new(StyleTag::Conv, "albany mn population", vec![])
        .with_markup(Markup::AnswerOnly("2,662".into()));
    let got = encode_source(&s).map_err(|e| e.to_string())?;
    ensure(got == "s:conv </s> q: albany mn population </s> p0: 2,662", || format!("answer-only {got:?}"))?;

    let passage = "Albany, Minnesota has a community population of 2,662 people.";
    let start = passage.find("2,662").unwrap();
    let s = SourceSequence::new(StyleTag::Conv, "albany mn population", vec![passage.into()]).with_markup(
        Markup::AnswerSpan {
            passage: 0,
            start,
            end: start + "2,662".len(),
        },
    );
    let got = encode_source(&s).map_err(|e| e.to_string())?;
    ensure(
        got == "s:conv </s> q: albany mn population </s> p0: Albany, Minnesota has a community population of <a>2,662</a> people. </s>",
        || format!("answer-span {got:?}"),
    )?;

    let got = encode_target(&TargetSequence::new(vec![1, 2, 0], "a")).map_err(|e| e.to_string())?;
    ensure(got == "p1: p2: p0: a", || format!("target {got:?}"))?;
    let p = parse_generated("p1: p2: p0: There are six terminals at the JFK airport.", 3);
    ensure(
        p.ranking == [1, 2, 0] && p.answer == "There are six terminals at the JFK airport." && p.diagnostics.is_empty(),
        || format!("parse {p:?}"),
    )
}

/// Exponential-time LCS straight from the recursive definition.
fn lcs_brute(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ra)), Some((y, rb))) if x == y => 1 + lcs_brute(ra, rb),
        (Some((_, ra)), Some((_, rb))) => lcs_brute(ra, b).max(lcs_brute(a, rb)),
        _ => 0,
    }
}

fn rouge_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let beta: f64 = 1.2;
    for _ in 0..100 {
        let a: Vec<u8> = (0..rng.gen_range(0..=12)).map(|_| rng.gen_range(0..5)).collect();
        let b: Vec<u8> = (0..rng.gen_range(1..=12)).map(|_| rng.gen_range(0..5)).collect();
        let l = lcs_brute(&a, &b) as f64;
        let expected = if l == 0.0 {
            0.0
        } else {
            let (p, r) = (l / a.len() as f64, l / b.len() as f64);
            (1.0 + beta * beta) * p * r / (r + beta * beta * p)
        };
        let got = rouge_l_single(&a, &b, beta);
        ensure((got - expected).abs() <= 1e-9, || format!("{a:?} vs {b:?}: {got} != {expected}"))?;
    }
    Ok(())
}

fn metric_identities() -> Outcome {
    let s = toks("There are six terminals at the JFK airport.");
    let b1 = bleu(std::slice::from_ref(&s), &[vec![s.clone()]], 1).map_err(|e| e.to_string())?;
    let rl = rouge_l(&s, std::slice::from_ref(&s), 1.2).map_err(|e| e.to_string())?;
    ensure(pct2(b1) == "100.00" && pct2(rl) == "100.00", || format!("identity B-1 {b1}, R-L {rl}"))?;

    let cand = toks("six terminals");
    let reference = vec![toks("there are six terminals at the jfk airport")];
    let rl = rouge_l(&cand, &reference, 1.2).map_err(|e| e.to_string())?;
    let b1 = bleu(std::slice::from_ref(&cand), std::slice::from_ref(&reference), 1).map_err(|e| e.to_string())?;
    let m = meteor(&cand, &reference, &MeteorParams::default());
    ensure(pct2(rl) == "36.09", || format!("R-L {}", pct2(rl)))?;
    ensure(pct2(b1) == "4.98", || format!("B-1 {}", pct2(b1)))?;
    ensure(pct2(m) == "25.34", || format!("METEOR {}", pct2(m)))
}

fn factuality_config(out: &Path) -> Result<PipelineConfig, String> {
    let mut cfg = PipelineConfig::load(&fixtures().join("factuality/factuality.toml")).map_err(|e| e.to_string())?;
    cfg.out_dir = out.to_path_buf();
    Ok(cfg)
}

fn factuality_fixture() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (report, _) = cmd_evaluate(&factuality_config(dir.path())?).map_err(|e| e.to_string())?;
    let f = report.factuality.ok_or("no factuality report")?;
    let (np, na) = (f.n_p_rate.ok_or("no N-P")?, f.n_a_rate.ok_or("no N-A")?);
    ensure((np - 300.0 / 7.0).abs() < 1e-9 && format!("{np:.2}") == "42.86", || format!("N-P {np}"))?;
    ensure((na - 100.0 / 7.0).abs() < 1e-9 && format!("{na:.2}") == "14.29", || format!("N-A {na}"))?;

    let labels = std::fs::read_to_string(fixtures().join("factuality/labels.csv")).map_err(|e| e.to_string())?;
    for line in labels.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let v = f
            .per_example
            .iter()
            .find(|v| v.query_id == cols[0])
            .ok_or_else(|| format!("no verdict for {}", cols[0]))?;
        ensure(v.factual == (cols[1] == "entail"), || format!("{} N-P", cols[0]))?;
        ensure(v.correct == (cols[2] == "entail"), || format!("{} N-A", cols[0]))?;
    }
    let md = std::fs::read_to_string(dir.path().join("metrics.md")).map_err(|e| e.to_string())?;
    ensure(md.contains("| 42.86 | 14.29 |"), || format!("metrics.md:\n{md}"))
}

fn agreement() -> Outcome {
    let auto: Vec<ExampleVerdict> = (0..100)
        .map(|i| ExampleVerdict {
            query_id: format!("q{i:03}"),
            factual: i % 4 != 0,
            correct: i % 2 == 0,
            np_labels: vec![],
            na_labels: vec![],
            conflicting: false,
        })
        .collect();
    let mut csv = String::from("query_id,factual_vs_passage,correct_vs_gold\n");
    for (i, v) in auto.iter().enumerate() {
        let np = if i < 10 { !v.factual } else { v.factual };
        let na = if (40..46).contains(&i) { !v.correct } else { v.correct };
        csv.push_str(&format!("{},{np},{na}\n", v.query_id));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("human.csv");
    std::fs::write(&path, csv).map_err(|e| e.to_string())?;
    let human = load_annotations(&path).map_err(|e| e.to_string())?;
    let a = human_agreement(&auto, &human).map_err(|e| e.to_string())?;
    ensure((a.np_agreement, a.na_agreement) == (0.90, 0.94), || format!("{a:?}"))
}

fn example(id: &str, n: usize, gold: &[usize]) -> QaExample {
    QaExample {
        query_id: id.into(),
        query: format!("question {id}"),
        passages: (0..n)
            .map(|i| Passage {
                index: i,
                text: format!("passage {i}"),
                is_selected: gold.contains(&i),
                url: None,
            })
            .collect(),
        answers: vec!["an answer".into()],
        well_formed_answers: vec!["It is an answer.".into()],
        answerable: true,
    }
}

fn kendall_brute(pred: &[usize], reference: &[usize]) -> f64 {
    let n = pred.len();
    if n < 2 {
        return 1.0;
    }
    let pos = |r: &[usize], x: usize| r.iter().position(|&y| y == x).unwrap();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    for a in 0..n {
        for b in a + 1..n {
            let s = (pos(pred, a) < pos(pred, b)) == (pos(reference, a) < pos(reference, b));
            if s {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    (concordant - discordant) as f64 / (n * (n - 1) / 2) as f64
}

fn ranking_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        // coarse values force ties
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64 / 4.0).collect();
        let gold: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        let ex = example(&format!("q{case}"), n, &gold);
        let rs = RankingScores {
            query_id: ex.query_id.clone(),
            scores: scores.clone(),
        };

        let order = argsort_desc(&scores);
        let e2e = apply_config(&ex, Some(&rs), RankedConfig::EndToEnd).map_err(|e| e.to_string())?;
        ensure(e2e.target_ranking == order, || format!("end_to_end ranking for {scores:?}"))?;
        ensure(e2e.dataset_positions == (0..n).collect::<Vec<_>>(), || "end_to_end reordered source".into())?;
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            ensure(scores[a] > scores[b] || (scores[a] == scores[b] && a < b), || {
                format!("argsort not stable-descending at {a},{b} for {scores:?}")
            })?;
        }
        ensure(order.iter().copied().collect::<HashSet<_>>().len() == n, || "argsort not a permutation".into())?;

        let top_n = rng.gen_range(1..=10);
        let ranked = apply_config(&ex, Some(&rs), RankedConfig::RankedN { top_n }).map_err(|e| e.to_string())?;
        let k = top_n.min(n);
        ensure(ranked.dataset_positions == order[..k], || format!("ranked_n prefix for {scores:?}"))?;
        ensure(ranked.target_ranking == (0..k).collect::<Vec<_>>(), || "ranked_n target not identity".into())?;
        let t = encode_target(&TargetSequence::new(ranked.target_ranking.clone(), "a")).map_err(|e| e.to_string())?;
        ensure(parse_generated(&t, k).ranking == (0..k).collect::<Vec<_>>(), || "ranked_n parse".into())?;

        if !gold.is_empty() {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let acc = top_k_accuracy(&[(perm, gold.clone())], n).map_err(|e| e.to_string())?;
            ensure(acc == Some(1.0), || format!("top_k_accuracy(k=n) = {acc:?}"))?;
        }
    }
    for n in 0..=8 {
        for _ in 0..50 {
            let mut a: Vec<usize> = (0..n).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            let got = ranking_agreement(&a, &b).map_err(|e| e.to_string())?;
            let want = kendall_brute(&a, &b);
            ensure((got - want).abs() < 1e-12, || format!("tau {a:?} {b:?}: {got} vs {want}"))?;
        }
    }
    Ok(())
}

fn mst_balance() -> Outcome {
    let origin = |name: &str, style, n: usize| CorpusSource {
        origin: name.into(),
        style,
        examples: (0..n).map(|i| example(&format!("{name}{i}"), 3, &[0])).collect(),
    };
    let sources = [origin("ans", StyleTag::Extract, 100), origin("nlgen", StyleTag::Conv, 20)];
    let policy = MixPolicy {
        mode: MixMode::Balanced,
        seed: 5,
        shuffle: true,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let c = build_mixed_corpus(&sources, &policy, &ScoreTable::unranked()).map_err(|e| e.to_string())?;
        ensure(c.rows.len() == 40, || format!("{} rows", c.rows.len()))?;
        for o in ["ans", "nlgen"] {
            let n = c.rows.iter().filter(|r| r.origin == o).count();
            ensure(n == 20, || format!("{o}: {n} rows"))?;
        }
        write_corpus(&dir.path().join(run), &c, &policy).map_err(|e| e.to_string())?;
        files.push(std::fs::read(dir.path().join(run).join(CORPUS_FILE)).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "corpus files differ between runs".into())
}

fn answerability() -> Outcome {
    let r = answerability_f1(&[true, true, false, false], &[true, false, true, false]).map_err(|e| e.to_string())?;
    ensure((r.precision, r.recall, r.f1) == (0.5, 0.5, 0.5), || format!("{r:?}"))
}

/// Evaluates the factuality fixture with generation served from a warm cache
/// and NLI from a read-only verdict cache; no endpoint is configured.
fn offline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = factuality_config(&dir.path().join("out"))?;
    ensure(cfg.generation.endpoint.is_none() && cfg.factuality.endpoint.is_none(), || "endpoint configured".into())?;
    let gold: Vec<QaExample> = std::fs::read_to_string(cfg.data.gold.as_ref().unwrap())
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let preds = std::fs::read_to_string(cfg.predictions.as_ref().unwrap()).map_err(|e| e.to_string())?;
    let cache_path = dir.path().join("generation.jsonl");
    let cache = GenerationCache::open(&cache_path).map_err(|e| e.to_string())?;
    for (ex, line) in gold.iter().zip(preds.lines()) {
        let raw: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let texts = ex.passages.iter().map(|p| p.text.clone()).collect();
        let source = encode_source(&SourceSequence::new(cfg.generation.style, ex.query.clone(), texts))
            .map_err(|e| e.to_string())?;
        let value = CachedGeneration {
            raw: raw["raw"].as_str().unwrap_or_default().to_string(),
            latency_ms: 0,
        };
        cache.insert(&source, &cfg.generation.backend_id, value).map_err(|e| e.to_string())?;
    }
    drop(cache);
    cfg.predictions = None;
    cfg.generation.cache = Some(cache_path);
    let (report, manifest) = cmd_evaluate(&cfg).map_err(|e| e.to_string())?;
    ensure(manifest.row_counts.get("generated") == Some(&7), || format!("{:?}", manifest.row_counts))?;
    let f = report.factuality.ok_or("no factuality report")?;
    ensure(format!("{:.2}", f.n_p_rate.unwrap_or_default()) == "42.86", || "N-P differs offline".into())
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let ms = Duration::from_millis;
    suite.check("codec round-trip (1000 random targets)", ms(1_000), codec_round_trip);
    suite.check("source and target grammar literals", ms(100), source_grammar);
    suite.check("ROUGE-L vs brute-force LCS (100 pairs, 1e-9)", ms(10_000), rouge_oracle);
    suite.check("metric identities and fixtures (R-L 36.09, B-1 4.98, METEOR 25.34)", ms(100), metric_identities);
    suite.check("factuality rates via evaluate (N-P 42.86, N-A 14.29)", ms(2_000), factuality_fixture);
    suite.check("human agreement fixture (0.90, 0.94)", ms(500), agreement);
    suite.check("ranking properties and Kendall tau oracle", ms(5_000), ranking_properties);
    suite.check("MST balanced 100/20 -> 40 rows, deterministic", ms(1_000), mst_balance);
    suite.check("answerability F1 fixture (P=R=F1=0.5)", ms(100), answerability);
    suite.check("offline completeness (cache-only generation and NLI)", ms(2_000), offline);
    if suite.failures > 0 {
        println!("{} acceptance criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
