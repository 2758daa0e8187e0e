#![allow(dead_code)]

pub mod oracle;

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sponsorscope_core::agreement::LabelMatrix;
use sponsorscope_core::corpus::{build_annotation_batch, Corpus, FollowerTier, Post};
use sponsorscope_core::explainer::{Explanation, ExplanationSource, ImpliedLabel};
use sponsorscope_core::service::{
    batch_from_corpus, AnnotationService, Expertise, NextItem, Setup,
};
use sponsorscope_core::Label;

use oracle::Grid;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random binary grid: `annotators` x `items`, each cell missing with
/// probability `missing`.
pub fn random_grid(rng: &mut ChaCha8Rng, annotators: usize, items: usize, missing: f64) -> Grid {
    (0..annotators)
        .map(|_| {
            (0..items)
                .map(|_| (!rng.random_bool(missing)).then(|| rng.random_range(0..2u8)))
                .collect()
        })
        .collect()
}

pub fn to_label(v: u8) -> Label {
    if v == 0 {
        Label::Sponsored
    } else {
        Label::NonSponsored
    }
}

pub fn grid_to_matrix(grid: &Grid) -> LabelMatrix {
    let items = grid.first().map_or(0, Vec::len);
    LabelMatrix::from_cells(
        (0..grid.len()).map(|i| format!("a{i}")).collect(),
        (0..items).map(|i| format!("i{i:02}")).collect(),
        grid.iter()
            .map(|row| row.iter().map(|c| c.map(to_label)).collect())
            .collect(),
    )
    .unwrap()
}

const BRANDS: &[&str] = &["glowlab", "nordkit", "sunnyshoes", "brewco", "fitfuel", "lumahome"];
const PRODUCTS: &[&str] = &["serum", "sneakers", "protein bars", "coffee", "lamp", "backpack"];
const ACTIVITIES: &[&str] = &[
    "Sunday hike", "Beach day", "Family dinner", "Late night studio session", "Morning run",
    "Lazy brunch", "Road trip", "Gallery visit",
];
const WHO: &[&str] = &["the dogs", "my sister", "old friends", "the crew", "mum", "nobody"];
const DISCLOSURES: &[&str] = &[
    "#ad", "#AD", "#Ad", "#sponsored", "#Sponsored", "#spons", "#advertisement", "#ADVERTISEMENT",
];
const LOOKALIKES: &[&str] = &["#adventure", "#adidas", "#sponsoredbyme", "#advent", "#badday"];

/// Deterministic synthetic posts. Roughly a third carry a disclosure hashtag
/// at the start, in the middle, at the end or chained to another tag.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Post> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let promo = r.random_bool(0.5);
            let mut caption = if promo {
                format!(
                    "Loving my new {} from @{}! Use code {}{} for {}% off, link in bio",
                    PRODUCTS.choose(&mut r).unwrap(),
                    BRANDS.choose(&mut r).unwrap(),
                    ["SAVE", "GLOW", "FIT", "HOME"].choose(&mut r).unwrap(),
                    r.random_range(10..99),
                    r.random_range(5..40),
                )
            } else {
                format!(
                    "{} with {}. {}",
                    ACTIVITIES.choose(&mut r).unwrap(),
                    WHO.choose(&mut r).unwrap(),
                    ["Feeling grateful", "Best day", "So tired", "More soon"].choose(&mut r).unwrap()
                )
            };
            if r.random_bool(0.2) {
                caption = format!("{caption} {}", LOOKALIKES.choose(&mut r).unwrap());
            }
            if r.random_bool(if promo { 0.6 } else { 0.05 }) {
                let tag = *DISCLOSURES.choose(&mut r).unwrap();
                caption = match r.random_range(0..4) {
                    0 => format!("{tag} {caption}"),
                    1 => {
                        let mid = caption.find(' ').unwrap_or(caption.len());
                        format!("{} {tag}{}", &caption[..mid], &caption[mid..])
                    }
                    2 => format!("{caption} {tag}"),
                    _ => format!("{caption} #love{tag}{}", DISCLOSURES.choose(&mut r).unwrap()),
                };
            }
            let followers = r.random_range(100_000..2_000_000u64);
            let year = r.random_range(2016..=2023);
            Post {
                post_id: format!("p{i:05}"),
                influencer_id: format!("inf{:03}", r.random_range(0..300)),
                caption,
                published_at: Utc
                    .with_ymd_and_hms(year, r.random_range(1..=12), r.random_range(1..=28), 12, 0, 0)
                    .unwrap(),
                followers,
                follower_tier: FollowerTier::from_followers(followers).unwrap(),
            }
        })
        .collect()
}

/// Linearly separable captions: each class draws its cue words from its own
/// pool and shares a filler pool.
pub fn separable_corpus(n: usize, seed: u64) -> (Vec<String>, Vec<Label>) {
    let pos = ["discount", "code", "partner", "collab", "giveaway", "promo", "shop", "link"];
    let neg = ["sunset", "family", "hike", "dinner", "memories", "weekend", "garden", "nap"];
    let filler = ["today", "really", "new", "my", "the", "so", "with", "and", "love", "time"];
    let mut r = rng(seed);
    let mut captions = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let sponsored = r.random_bool(0.5);
        let cues = if sponsored { &pos } else { &neg };
        let mut words: Vec<&str> = (0..r.random_range(2..4)).map(|_| *cues.choose(&mut r).unwrap()).collect();
        words.extend((0..r.random_range(3..7)).map(|_| *filler.choose(&mut r).unwrap()));
        for i in (1..words.len()).rev() {
            words.swap(i, r.random_range(0..=i));
        }
        captions.push(words.join(" "));
        labels.push(Label::from_sponsored(sponsored));
    }
    (captions, labels)
}

/// Local chat-completion stand-in: answers 503 for the first `failures`
/// requests, then 200 with `content` as the assistant message.
pub async fn spawn_flaky_endpoint(failures: usize, content: String) -> (String, Arc<AtomicUsize>) {
    use axum::http::StatusCode;
    use axum::routing::post;
    use axum::{Json, Router};

    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let app = Router::new().route(
        "/v1/chat/completions",
        post(move |Json(_body): Json<serde_json::Value>| {
            let counter = counter.clone();
            let content = content.clone();
            async move {
                let n = counter.fetch_add(1, Ordering::SeqCst);
                if n < failures {
                    return (StatusCode::SERVICE_UNAVAILABLE, "try later".to_string());
                }
                let body = serde_json::json!({
                    "id": "fixture",
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
                });
                (StatusCode::OK, body.to_string())
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    (format!("http://{addr}/v1"), hits)
}

/// A URL nothing listens on.
pub fn dead_endpoint() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/v1")
}

pub struct Study {
    pub service: AnnotationService,
    pub batch_id: String,
    pub project_ids: Vec<String>,
}

/// Eleven synthetic annotators label one 200-post batch; four of them take
/// both setups, giving fifteen projects. Each judgement is a deterministic
/// function of the seed, annotator, setup and post: accuracy grows with
/// expertise and with explanations.
pub fn simulate_study(seed: u64) -> Study {
    let corpus = Corpus::from_posts(synthetic_corpus(2_000, seed)).unwrap();
    let batch = build_annotation_batch(&corpus, 200, 0.15, seed).unwrap();
    let truth: HashMap<String, bool> = batch
        .items
        .iter()
        .map(|id| {
            let c = corpus.get(id).unwrap().caption.to_lowercase();
            (id.clone(), c.contains("code") || batch.disclosed_items.contains(id))
        })
        .collect();
    let explanations: HashMap<String, Explanation> = batch
        .items
        .iter()
        .map(|id| {
            let sponsored = truth[id];
            let e = Explanation {
                post_id: id.clone(),
                key_indicators: if sponsored { vec!["code".into()] } else { vec![] },
                rationale: if sponsored {
                    "The caption shares a discount code, typical of paid partnerships.".into()
                } else {
                    "Nothing in the caption promotes a product.".into()
                },
                implied_label: if sponsored {
                    ImpliedLabel::LikelySponsored
                } else {
                    ImpliedLabel::LikelyNotSponsored
                },
                source: ExplanationSource::Remote,
            };
            (id.clone(), e)
        })
        .collect();
    let stored = batch_from_corpus(&batch, &corpus, &explanations).unwrap();

    let service = AnnotationService::in_memory();
    service.register_batch(stored).unwrap();

    let people: Vec<(String, Expertise, Vec<Setup>)> = (0..11)
        .map(|i| {
            let expertise = match i % 3 {
                0 => Expertise::LegalExpert,
                1 => Expertise::SomeExperience,
                _ => Expertise::NoExperience,
            };
            let setups = if i < 4 {
                vec![Setup::WithoutExplanations, Setup::WithExplanations]
            } else if i % 2 == 0 {
                vec![Setup::WithoutExplanations]
            } else {
                vec![Setup::WithExplanations]
            };
            (format!("ann{i:02}"), expertise, setups)
        })
        .collect();

    let mut project_ids = Vec::new();
    for (k, (id, expertise, setups)) in people.iter().enumerate() {
        service.register_annotator(id, *expertise).unwrap();
        for &setup in setups {
            let pid = service.create_project(id, &batch.batch_id, setup, seed).unwrap().project_id;
            let accuracy = match expertise {
                Expertise::LegalExpert => 0.85,
                Expertise::SomeExperience => 0.78,
                Expertise::NoExperience => 0.72,
            } + if setup == Setup::WithExplanations { 0.08 } else { 0.0 };
            let mut r = rng(seed ^ ((k as u64) << 8) ^ setup as u64);
            while let NextItem::Item(v) = service.next_item(&pid).unwrap() {
                let correct = r.random_bool(accuracy);
                let label = Label::from_sponsored(truth[&v.post_id] == correct);
                service.submit_label(&pid, &v.post_id, label).unwrap();
            }
            project_ids.push(pid);
        }
    }
    Study {
        service,
        batch_id: batch.batch_id,
        project_ids,
    }
}

pub fn ids(set: &BTreeSet<String>) -> Vec<String> {
    set.iter().cloned().collect()
}
