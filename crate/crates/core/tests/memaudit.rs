use std::collections::HashMap;

use qattr_core::corpus::Novel;
use qattr_core::inference::MockBackend;
use qattr_core::memaudit::csg::{sample_csg_items, CsgVariant};
use qattr_core::memaudit::names::{find_mentions, NameConfig};
use qattr_core::memaudit::{build_csg_item, run_csg, CsgConfig, CsgItem};
use qattr_core::prompting::{CsgPromptInput, PromptTemplates};
use qattr_core::synth::generate_corpus;

fn corpus() -> Vec<Novel> {
    generate_corpus(6, 0, 11).iter().map(|s| s.novel().unwrap()).collect()
}

fn prompt_for(novel: &Novel, item: &CsgItem, templates: &PromptTemplates) -> String {
    templates
        .csg(&CsgPromptInput {
            cloze: item.variant == CsgVariant::Cloze,
            title: novel.title.clone(),
            author: novel.author.clone(),
            corrupted_passage: item.corrupted_passage.clone(),
            target_quote: item.target_quote.clone(),
            referring_expression: item.referring_expression.clone(),
        })
        .unwrap()
}

fn scripted(novel: &Novel, cfg: &CsgConfig, answer: impl Fn(&CsgItem) -> String) -> MockBackend {
    let templates = PromptTemplates::default();
    let map: HashMap<String, String> = sample_csg_items(novel, cfg)
        .values()
        .flatten()
        .map(|item| (prompt_for(novel, item, &templates), format!("<speaker>{}</speaker>", answer(item))))
        .collect();
    MockBackend::from_map(map)
}

#[test]
fn replacement_answers_are_pure_reasoning() {
    let templates = PromptTemplates::default();
    for novel in corpus().iter().take(3) {
        let cfg = CsgConfig { n_per_type: 20, seed: 5, ..CsgConfig::default() };
        let mock = scripted(novel, &cfg, |i| i.replacement_name.clone());
        let run = run_csg(novel, &mock, &templates, &cfg).unwrap();
        assert_eq!(run.result.reason_accuracy, 1.0);
        assert_eq!(run.result.mem_accuracy, 0.0);
    }
}

#[test]
fn true_speaker_answers_are_pure_memorization() {
    let templates = PromptTemplates::default();
    for novel in corpus().iter().take(3) {
        let cfg = CsgConfig { n_per_type: 20, seed: 6, ..CsgConfig::default() };
        let mock = scripted(novel, &cfg, |i| i.true_speaker.clone());
        let run = run_csg(novel, &mock, &templates, &cfg).unwrap();
        assert_eq!(run.result.mem_accuracy, 1.0);
        assert_eq!(run.result.reason_accuracy, 0.0);
        assert_eq!(run.result.cloze_mem_accuracy, Some(1.0));
        for t in run.result.per_type.values() {
            assert!(t.memorization + t.reasoning <= t.n);
        }
    }
}

#[test]
fn shortfall_is_recorded() {
    let templates = PromptTemplates::default();
    let novel = &corpus()[0];
    let cfg = CsgConfig { n_per_type: 1000, seed: 1, ..CsgConfig::default() };
    let run = run_csg(novel, &MockBackend::constant("<speaker>X</speaker>"), &templates, &cfg).unwrap();
    for t in run.result.per_type.values() {
        assert_eq!(t.shortfall, 1000 - t.n);
    }
    assert_eq!(run.result.mem_accuracy, 0.0);
    assert_eq!(run.result.reason_accuracy, 0.0);
}

#[test]
fn seeded_runs_repeat() {
    let templates = PromptTemplates::default();
    let novel = &corpus()[1];
    let cfg = CsgConfig { n_per_type: 10, seed: 42, ..CsgConfig::default() };
    let mock = MockBackend::hashing();
    let a = run_csg(novel, &mock, &templates, &cfg).unwrap();
    let b = run_csg(novel, &mock, &templates, &cfg).unwrap();
    assert_eq!(a, b);
    let c = run_csg(novel, &mock, &templates, &CsgConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(
        a.answers.iter().map(|x| &x.item.quote_id).collect::<Vec<_>>(),
        c.answers.iter().map(|x| &x.item.quote_id).collect::<Vec<_>>()
    );
}

#[test]
fn corruption_invariants_hold_for_every_item() {
    let names = NameConfig::default();
    let mut checked = 0;
    for novel in corpus() {
        for i in 0..novel.quotes.len() {
            let Ok(item) = build_csg_item(&novel, i, &names, i as u64) else { continue };
            let speaker = novel.characters.get(&item.true_speaker).unwrap();
            assert!(
                find_mentions(&item.corrupted_passage, &novel.characters).iter().all(|m| m.character != speaker.id),
                "{}",
                item.corrupted_passage
            );
            assert!(item.corrupted_passage.contains(&item.replacement_name));
            for form in &item.replacement_forms {
                assert!(novel.characters.resolve(form).is_none());
            }
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} items");
}
