//! Deterministic fixture generators.
//!
//! The small fixtures are committed under `fixtures/` by the `build_fixtures` example; the
//! large grid and ablation corpora are generated into temporary directories by the tests.

use std::collections::BTreeMap;
use std::path::Path;

use licensekit_core::corpus::{save_corpus_jsonl, target_completion, Platform};
use licensekit_core::experiments::{persist_summary, Backend, RunLock, RunManifest};
use licensekit_core::hashing::{json_hash, sha256_hex};
use licensekit_core::metrics::{DrMode, MetricSummary};
use licensekit_core::modelgate::{prompt_fingerprint, ModelEndpointConfig, ReplayEntry, ReplayStore};
use licensekit_core::prompts::render;
use licensekit_core::{Category, Corpus, Label, LicenseRecord, RecordStatus, TemplatePack};

pub const SAMPLE_MODELS: [&str; 3] = ["lawgpt", "qwen15", "licensegpt"];
pub const SAMPLE_SYSTEM: &str = "sys_v3";
pub const SAMPLE_USER: &str = "user_v3";
pub const CC_BY_NC_ID: &str = "cc-by-nc-4.0";

pub const LICENSEGPT_CC_BY_NC: &str = "You cannot use a dataset licensed under CC BY-NC 4.0 in a commercial project without violating the terms. The 'NC' stands for 'NonCommercial', which explicitly restricts use for any commercial purposes, including activities that involve financial gain. However, you can use the dataset for research or educational purposes. If you still want to use the dataset for commercial purposes, you would need to negotiate a separate commercial license with the rights holder. Be sure to provide proper attribution regardless of the usage type, as required by the 'BY' clause of the license.";
pub const LAWGPT_CC_BY_NC: &str = "The CC BY-NC 4.0 license allows for the use of data, but there are restrictions. You may need to attribute the original creator.";
pub const QWEN_CC_BY_NC: &str = "Under CC BY-NC 4.0, you can use the dataset as long as it is not for commercial purposes. Commercial use may be restricted.";

/// Recorded five-model means: model, PA, SS, DR, NRR, ARS.
pub const FIVE_MODELS: [(&str, f64, f64, f64, f64, f64); 5] = [
    ("chatgpt4", 18.06, 94.80, 0.0, 3.40, 1.30),
    ("llama2", 40.28, 92.00, 1.87, 5.17, 1.00),
    ("qwen15", 59.72, 83.10, 0.0, 0.79, 3.80),
    ("lawgpt", 43.75, 50.25, 0.0, 0.0, 1.7),
    ("licensegpt", 64.30, 85.80, 5.71, 3.4, 2.40),
];

/// Eleven-model comparison: model, PA, DR, NRR, ARS, SS.
pub const ELEVEN_MODELS: [(&str, f64, f64, f64, f64, f64); 11] = [
    ("lawgpt_zh", 35.71, 16.67, 23.81, 5.0, 31.78),
    ("fuzimingcha", 30.95, 7.14, 21.43, 65.0, 44.39),
    ("lexilaw", 40.71, 0.0, 20.12, 10.0, 39.06),
    ("hanfei", 22.05, 9.52, 11.9, 37.0, 37.01),
    ("wisdom_interrogatory", 43.02, 35.71, 9.52, 20.0, 34.36),
    ("lawgpt", 43.75, 0.0, 0.0, 1.7, 50.25),
    ("llama", 19.05, 83.33, 4.76, 13.0, 65.45),
    ("chatlaw", 19.05, 35.71, 21.43, 9.0, 63.38),
    ("chatgpt4", 18.06, 0.0, 3.40, 1.3, 94.80),
    ("llama2", 40.28, 1.87, 5.17, 1.0, 92.00),
    ("qwen15", 59.72, 0.0, 0.79, 3.8, 83.10),
];

pub const GRID_SYSTEMS: [&str; 6] = ["sys_v1", "sys_v2", "sys_v3", "sys_v4", "sys_v5", "sys_v6"];
pub const GRID_USERS: [&str; 3] = ["user_v1", "user_v2", "user_v3"];
pub const GRID_MODEL: &str = "licensegpt";
/// Mean PA per (system, user) cell.
pub const GRID_PA: [[f64; 3]; 6] = [
    [48.1, 50.2, 54.1],
    [47.6, 49.5, 52.9],
    [47.9, 52.2, 64.3],
    [28.3, 28.7, 4.8],
    [40.2, 41.6, 44.5],
    [45.3, 46.0, 49.1],
];

/// Training size and mean PA of the model tuned on that many records.
pub const ABLATION_POINTS: [(usize, f64); 8] = [
    (100, 39.3),
    (150, 42.7),
    (200, 44.4),
    (250, 52.8),
    (300, 56.1),
    (350, 60.7),
    (400, 62.1),
    (450, 64.3),
];

/// Records per class in the generated grid and ablation corpus. Every fold of a 10-fold split
/// holds the same number of records, so mean fold PA equals overall PA.
pub const LARGE_PER_CLASS: usize = 1000;
pub const LARGE_K: usize = 10;

/// Fold-spread offsets for recorded summaries; they sum to zero.
const FOLD_OFFSETS: [f64; 10] = [-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9];

fn unit(key: &str) -> f64 {
    let h = sha256_hex(key.as_bytes());
    u64::from_str_radix(&h[..12], 16).unwrap() as f64 / (1u64 << 48) as f64
}

fn verdict_text(label: Label, variant: usize) -> &'static str {
    const ALLOW: [&str; 3] = [
        "This license allows commercial use.",
        "Yes. Commercial use is permitted as long as the stated conditions are met.",
        "The dataset can be used commercially.",
    ];
    const DENY: [&str; 3] = [
        "This license does not allow commercial use.",
        "Commercial use is prohibited; the data may serve research only.",
        "The dataset cannot be used commercially.",
    ];
    const UNCLEAR: [&str; 3] = [
        "It is unclear if the license allows commercial use.",
        "The terms are ambiguous about commercial use.",
        "The text does not specify whether commercial use is permitted, so the answer is uncertain.",
    ];
    match label {
        Label::AllowsCommercial => ALLOW[variant % 3],
        Label::DeniesCommercial => DENY[variant % 3],
        Label::Unclear | Label::Unlabeled => UNCLEAR[variant % 3],
    }
}

const NON_SPECIFIC: [&str; 2] = [
    "Thank you for sharing the document. It describes the conditions for accessing and redistributing the data.",
    "Please consult a qualified lawyer before relying on this dataset.",
];

fn other_label(label: Label, shift: usize) -> Label {
    let i = Label::GROUND_TRUTH.iter().position(|l| *l == label).unwrap_or(0);
    Label::GROUND_TRUTH[(i + 1 + shift % 2) % 3]
}

struct Cell {
    category: Category,
    label: Label,
    entries: &'static [(&'static str, &'static str, &'static str)],
}

const GENERAL_ALLOWS: &[(&str, &str, &str)] = &[
    ("mit", "MIT License", "Permission is hereby granted, free of charge, to any person obtaining a copy of this data and associated documentation files, to deal in the data without restriction, including without limitation the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies. The above copyright notice and this permission notice shall be included in all copies."),
    ("apache-2.0", "Apache License 2.0", "Subject to the terms and conditions of this License, each Contributor hereby grants to You a perpetual, worldwide, non-exclusive, no-charge, royalty-free, irrevocable copyright license to reproduce, prepare Derivative Works of, publicly display, publicly perform, sublicense, and distribute the Work. You must give recipients a copy of this License and retain all attribution notices."),
    ("cc-by-4.0", "Creative Commons Attribution 4.0", "You are free to share, copy and redistribute the material in any medium or format, and adapt, remix, transform, and build upon the material for any purpose, even commercially, as long as you give appropriate credit and indicate if changes were made."),
    ("cc0-1.0", "CC0 1.0 Universal", "The person who associated a work with this deed has dedicated the work to the public domain by waiving all of his or her rights to the work worldwide under copyright law. You can copy, modify, distribute and perform the work, even for commercial purposes, all without asking permission."),
    ("odc-by-1.0", "Open Data Commons Attribution License", "You are free to share, create and adapt the database, including for commercial use, provided that you attribute any public use of the database, or works produced from it, in the manner specified in the license."),
    ("bsd-3-clause", "BSD 3-Clause License", "Redistribution and use in source and binary forms, with or without modification, are permitted provided that redistributions retain the above copyright notice, this list of conditions and the disclaimer, and neither the name of the copyright holder nor its contributors are used to endorse derived products."),
];

const GENERAL_DENIES: &[(&str, &str, &str)] = &[
    (CC_BY_NC_ID, "Creative Commons Attribution-NonCommercial 4.0", "CC BY-NC 4.0 stands for Creative Commons Attribution-NonCommercial 4.0 International License. You may share and adapt the material under the following terms: you must give appropriate credit, and you may not use the material for commercial purposes."),
    ("cc-by-nc-sa-4.0", "Creative Commons Attribution-NonCommercial-ShareAlike 4.0", "You may remix, adapt and build upon the material non-commercially, as long as you credit the creator and license your new creations under identical terms. NonCommercial means not primarily intended for or directed towards commercial advantage or monetary compensation."),
    ("cc-by-nc-nd-4.0", "Creative Commons Attribution-NonCommercial-NoDerivatives 4.0", "You may copy and redistribute the material in unadapted form only, for noncommercial purposes only, and only so long as attribution is given to the creator. If you remix, transform, or build upon the material, you may not distribute the modified material."),
    ("c-uda-1.0", "Computational Use of Data Agreement", "The data may be used for computational analysis and research. Results of such analysis may be shared, but the data itself may not be sold, licensed for a fee or used to provide a commercial service."),
    ("ogl-research", "Research Data Licence", "The licensor grants a licence to use the data solely for non-commercial academic research. Any use of the data, or of models trained on the data, in a product or service offered for a fee is outside the scope of this licence."),
];

const GENERAL_UNCLEAR: &[(&str, &str, &str)] = &[
    ("other-license", "Other", "The dataset is released under a license chosen by the original authors. Please refer to the source for more information."),
    ("unknown-license", "Unknown", "License information for this dataset has not been provided by the uploader."),
    ("openrail", "OpenRAIL", "The data may be used subject to the use-based restrictions listed in the attachment. The attachment is maintained separately and may change from time to time."),
    ("cc-by-nc-custom", "CC license, version unspecified", "This work is licensed under a Creative Commons license. See the project page for the applicable version and conditions."),
    ("dual-terms", "Dual terms", "The annotations are provided under an open license; the underlying images remain the property of their respective owners, who have not stated the terms of reuse."),
];

const CUSTOM_ALLOWS: &[(&str, &str, &str)] = &[
    ("speechcorpus-terms", "SpeechCorpus Terms", "You may use, reproduce and distribute the recordings for any purpose, including in commercial speech products, provided that the corpus name is acknowledged in the product documentation."),
    ("geodata-open", "GeoData Open Licence", "The publisher grants a worldwide licence to exploit the information commercially and non-commercially, for example by combining it with other information or including it in your own product or application."),
    ("retail-reviews", "Retail Reviews Licence", "Licensee may use the review dataset to build, train and sell machine learning models. Redistribution of the raw reviews is allowed with this notice attached."),
    ("weather-obs", "Weather Observations Terms", "Observations may be freely used, copied and distributed by anyone, for commercial or non-commercial use, provided the source is credited."),
    ("code-snippets", "Code Snippet Collection Licence", "Each snippet may be incorporated into proprietary or open source software and distributed commercially without royalty, with no warranty of any kind."),
];

const CUSTOM_DENIES: &[(&str, &str, &str)] = &[
    ("medimg-terms", "Medical Imaging Data Use Agreement", "The recipient shall use the images only for internal research and shall not sell, lease or otherwise transfer the data or any derivative to a third party for profit."),
    ("newswire-academic", "Newswire Academic Licence", "Articles are licensed to accredited academic institutions for teaching and scholarly research. Use by or on behalf of any commercial entity is prohibited."),
    ("faces-agreement", "Faces Dataset Agreement", "Researcher agrees not to use the dataset for any commercial purpose, including developing or improving commercial products and services."),
    ("lyrics-corpus", "Lyrics Corpus Terms", "Lyrics remain the property of their publishers. The corpus is provided for non-profit linguistic study; any monetised use requires a licence from each publisher."),
    ("clinical-notes", "Clinical Notes Data Use Terms", "Access is restricted to credentialed users for non-commercial research. Users must not attempt re-identification and must not use the notes in commercial software."),
    ("satellite-eval", "Satellite Imagery Evaluation Licence", "The imagery is provided for evaluation purposes only, for a period of ninety days, and may not be incorporated in any commercial offering."),
];

const CUSTOM_UNCLEAR: &[(&str, &str, &str)] = &[
    ("forum-dump", "Forum Dump Notice", "Posts were collected from a public forum. Users retain rights to their posts. We make no claims about the rights of downstream users."),
    ("bird-sounds", "Bird Sounds Terms", "Recordings are shared by volunteers. Please be respectful of the recordists and credit them where appropriate."),
    ("legal-qa", "Legal QA Terms", "This collection is shared to advance the field. Contact the maintainers before use in a deployed system."),
    ("traffic-cams", "Traffic Camera Terms", "Frames are provided as is. Use of the frames must comply with applicable local regulations on video surveillance."),
    ("recipes-crawl", "Recipes Crawl Terms", "The recipes were gathered from several websites whose terms differ. Users are responsible for determining their own rights."),
];

const TERMS_ALLOWS: &[(&str, &str, &str)] = &[
    ("opengov-portal", "Open Government Portal Terms", "Unless otherwise stated, all content on this portal may be reused free of charge in any format or medium, including for commercial exploitation, provided the source is acknowledged."),
    ("stats-bureau", "Statistics Bureau Website Terms", "Statistical tables published on this website may be copied, adapted and used in commercial publications and products. Attribution to the Bureau is required."),
    ("museum-open", "Museum Open Access Policy", "Images of public-domain works in the collection are released for unrestricted use, including commercial use, without the need to request permission."),
    ("transit-feeds", "Transit Data Feed Terms", "Developers may use the real-time feeds in commercial applications provided the service is not represented as official and the feed is cached responsibly."),
    ("library-catalog", "Library Catalogue Terms", "Bibliographic records may be harvested and reused for any purpose, commercial or otherwise."),
];

const TERMS_DENIES: &[(&str, &str, &str)] = &[
    ("social-tos", "Social Platform Terms of Service", "You may not access or collect content from the service using automated means, and you may not sell, license or commercially exploit any content obtained from the service."),
    ("marketplace-tos", "Marketplace Terms of Use", "The website and its contents are for your personal, non-commercial use only. Any other use requires our prior written consent."),
    ("sports-stats-tos", "Sports Statistics Site Terms", "Data displayed on the site may be viewed for personal entertainment. Commercial use of the data, including in betting products, is strictly prohibited."),
    ("video-platform-tos", "Video Platform Terms", "You shall not download, reproduce or distribute any content except where a download link is provided by the service, and you shall not use content for commercial purposes."),
    ("qa-site-tos", "Q&A Site Terms", "Content may be viewed for personal use. Scraping the site to create a dataset for a commercial product is not permitted."),
];

const TERMS_UNCLEAR: &[(&str, &str, &str)] = &[
    ("blog-network-tos", "Blog Network Terms", "Authors own their content. The network has a licence to display it. Other uses are not addressed here."),
    ("photo-host-tos", "Photo Host Terms", "Each photo carries the licence chosen by its uploader, which may or may not permit reuse."),
    ("wiki-mirror-tos", "Wiki Mirror Terms", "This mirror republishes encyclopedia content. Licensing questions should be directed to the original project."),
    ("company-site-tos", "Company Website Terms", "Materials on this site are provided for information. We reserve all rights not expressly granted."),
    ("app-store-tos", "App Store Listing Terms", "Listing metadata is supplied by developers and may be subject to additional terms set by each developer."),
    ("radio-archive-tos", "Radio Archive Terms", "Archive recordings are made available to the public. Some programmes contain third-party material."),
];

const CELLS: [Cell; 9] = [
    Cell { category: Category::General, label: Label::AllowsCommercial, entries: GENERAL_ALLOWS },
    Cell { category: Category::General, label: Label::DeniesCommercial, entries: GENERAL_DENIES },
    Cell { category: Category::General, label: Label::Unclear, entries: GENERAL_UNCLEAR },
    Cell { category: Category::Customized, label: Label::AllowsCommercial, entries: CUSTOM_ALLOWS },
    Cell { category: Category::Customized, label: Label::DeniesCommercial, entries: CUSTOM_DENIES },
    Cell { category: Category::Customized, label: Label::Unclear, entries: CUSTOM_UNCLEAR },
    Cell { category: Category::OfficialTerms, label: Label::AllowsCommercial, entries: TERMS_ALLOWS },
    Cell { category: Category::OfficialTerms, label: Label::DeniesCommercial, entries: TERMS_DENIES },
    Cell { category: Category::OfficialTerms, label: Label::Unclear, entries: TERMS_UNCLEAR },
];

fn rationale(label: Label, category: Category) -> (String, Vec<String>) {
    let doc = match category {
        Category::OfficialTerms => "website terms",
        _ => "license",
    };
    match label {
        Label::AllowsCommercial => (
            format!("The {doc} grants use for any purpose and does not exclude commercial activity."),
            vec!["Right: commercial use".into(), "Obligation: keep attribution notices".into()],
        ),
        Label::DeniesCommercial => (
            format!("The {doc} limits use to non-commercial purposes."),
            vec!["Right: non-commercial research use".into(), "Obligation: no commercial exploitation".into()],
        ),
        _ => (
            format!("The {doc} does not state whether commercial use is allowed."),
            vec!["Obligation: confirm terms with the rights holder".into()],
        ),
    }
}

fn platform(category: Category, n: usize) -> &'static str {
    match category {
        Category::General => ["huggingface", "github"][n % 2],
        Category::Customized => ["github", "kaggle"][n % 2],
        Category::OfficialTerms => "website",
    }
}

/// 48 hand-written licenses: 16 per class and 16 per category.
pub fn sample_corpus() -> Corpus {
    let mut records = Vec::new();
    for cell in &CELLS {
        for (n, (id, name, body)) in cell.entries.iter().enumerate() {
            let (why, items) = rationale(cell.label, cell.category);
            records.push(LicenseRecord {
                id: id.to_string(),
                name: name.to_string(),
                platform: Platform(platform(cell.category, n).into()),
                category: cell.category,
                text: body.to_string(),
                url: None,
                label: cell.label,
                rationale: Some(why),
                rights_obligations: Some(items),
                status: RecordStatus::Valid,
            });
        }
    }
    Corpus::new(records).unwrap()
}

/// Response style of each sample model: share of correct answers, share of non-specific answers
/// among the rest, and latency range in seconds.
fn sample_profile(model: &str) -> (f64, f64, f64, f64) {
    match model {
        "licensegpt" => (0.75, 0.2, 2.0, 2.8),
        "qwen15" => (0.6, 0.1, 3.2, 4.4),
        _ => (0.45, 0.6, 1.4, 2.0),
    }
}

fn sample_response(model: &str, record: &LicenseRecord) -> (String, f64) {
    if record.id == CC_BY_NC_ID {
        let text = match model {
            "licensegpt" => LICENSEGPT_CC_BY_NC,
            "qwen15" => QWEN_CC_BY_NC,
            _ => LAWGPT_CC_BY_NC,
        };
        return (text.to_string(), sample_latency(model, &record.id));
    }
    let (p_correct, p_vague, _, _) = sample_profile(model);
    let roll = unit(&format!("{model}/{}/answer", record.id));
    let variant = (unit(&format!("{model}/{}/style", record.id)) * 3.0) as usize;
    let text = if roll < p_correct {
        let mut t = verdict_text(record.label, variant).to_string();
        if model == "licensegpt" {
            t.push(' ');
            t.push_str(&target_completion(record).unwrap());
        }
        t
    } else if roll < p_correct + (1.0 - p_correct) * p_vague {
        NON_SPECIFIC[variant % 2].to_string()
    } else {
        verdict_text(other_label(record.label, variant), variant).to_string()
    };
    (text, sample_latency(model, &record.id))
}

fn sample_latency(model: &str, id: &str) -> f64 {
    let (_, _, lo, hi) = sample_profile(model);
    let raw = lo + (hi - lo) * unit(&format!("{model}/{id}/latency"));
    (raw * 100.0).round() / 100.0
}

/// Recorded answers of the three sample models to every sample prompt under the default pack.
pub fn sample_replay(corpus: &Corpus) -> ReplayStore {
    let pack = TemplatePack::builtin();
    let mut store = ReplayStore::default();
    for model in SAMPLE_MODELS {
        let config = ModelEndpointConfig::offline(model);
        for record in corpus {
            let prompt = render(&pack, SAMPLE_SYSTEM, SAMPLE_USER, record).unwrap();
            let (text, latency_s) = sample_response(model, record);
            store.insert(ReplayEntry {
                fp: prompt_fingerprint(&config, &prompt),
                text,
                latency_s,
                embedding: None,
            });
        }
    }
    store
}

pub fn sample_manifest() -> RunManifest {
    RunManifest {
        run_id: "sample".into(),
        corpus_path: "corpus_sample.jsonl".into(),
        fraction: 1.0,
        k: 4,
        seed: 20240607,
        model_ids: SAMPLE_MODELS.iter().map(|m| m.to_string()).collect(),
        system_id: SAMPLE_SYSTEM.into(),
        user_id: SAMPLE_USER.into(),
        ruleset_path: None,
        embedder_id: "hashing-256".into(),
        backend: Backend::Replay,
        replay_path: Some("sample_replay.jsonl".into()),
        concurrency_limit: 4,
        pack_path: None,
        registry_path: None,
        allow_shrink: false,
        dr_mode: DrMode::Extras,
        base_dir: None,
    }
}

/// Ten records as raw JSON lines: two unreadable (one with invalid UTF-8, one blank), one
/// expired, one near-verbatim duplicate and six distinct valid licenses.
pub fn filter_sample_jsonl() -> Vec<u8> {
    let corpus = sample_corpus();
    let pick = |id: &str| corpus.get(id).unwrap().clone();
    let mut lines: Vec<Vec<u8>> = Vec::new();
    let mut push = |r: &LicenseRecord| lines.push(serde_json::to_vec(r).unwrap());

    let mut blank = pick("unknown-license");
    blank.id = "blank-text".into();
    blank.text = "  \n\t ".into();
    push(&blank);

    let mut expired = pick("satellite-eval");
    expired.id = "expired-eval".into();
    expired.text = "Evaluation licence, expired. The ninety day evaluation period has ended.".into();
    expired.status = RecordStatus::Expired;
    push(&expired);

    let base = pick("mit");
    push(&base);
    let mut dup = base.clone();
    dup.id = "mit-copy".into();
    dup.text = format!("  {}  ", base.text.to_uppercase().replace(' ', "   "));
    push(&dup);

    for id in ["apache-2.0", CC_BY_NC_ID, "forum-dump", "social-tos", "opengov-portal"] {
        push(&pick(id));
    }

    let mut garbled = pick("bird-sounds");
    garbled.id = "garbled".into();
    garbled.text = "GARBLED_BYTES".into();
    let mut raw = serde_json::to_vec(&garbled).unwrap();
    let at = raw.windows(13).position(|w| w == b"GARBLED_BYTES").unwrap();
    raw.splice(at..at + 13, [0xff, 0xfe, 0x80, b'x']);
    lines.push(raw);

    let mut out = Vec::new();
    for line in lines {
        out.extend_from_slice(&line);
        out.push(b'\n');
    }
    out
}

/// 500 metadata records: 146 general licenses, 186 customized licenses, 168 website terms.
pub fn category_corpus() -> Corpus {
    let mut records = Vec::new();
    for (category, count) in [(Category::General, 146), (Category::Customized, 186), (Category::OfficialTerms, 168)] {
        for n in 0..count {
            let id = format!("{}-{n:03}", category.as_str());
            records.push(LicenseRecord {
                id: id.clone(),
                name: format!("{} {n}", category.as_str()),
                platform: Platform(platform(category, n).into()),
                category,
                text: format!("Terms of use for dataset {id}."),
                url: None,
                label: Label::GROUND_TRUTH[n % 3],
                rationale: None,
                rights_obligations: None,
                status: RecordStatus::Valid,
            });
        }
    }
    Corpus::new(records).unwrap()
}

fn summary_lock(run_id: &str, models: &[&str], k: usize) -> RunLock {
    RunLock {
        run_id: run_id.into(),
        manifest_hash: json_hash(&(run_id, models)),
        corpus_hash: json_hash(&"recorded corpus"),
        subset_hash: json_hash(&"recorded subset"),
        fold_hash: json_hash(&("recorded folds", k)),
        pack_hash: TemplatePack::builtin().content_hash(),
        ruleset_hash: licensekit_core::metrics::Ruleset::english().content_hash(),
        replay_hash: None,
        k,
        model_ids: {
            let mut m: Vec<String> = models.iter().map(|s| s.to_string()).collect();
            m.sort();
            m
        },
        system_id: SAMPLE_SYSTEM.into(),
        user_id: SAMPLE_USER.into(),
        embedder_id: "recorded".into(),
        dr_mode: DrMode::Extras,
        manifest: None,
    }
}

fn spread(mean: f64, offset: f64) -> f64 {
    ((mean * (1.0 + 0.05 * offset)) * 1e6).round() / 1e6
}

/// Ten folds per model whose means equal the given values.
fn recorded_folds(pa: f64, ss: f64, dr: f64, nrr: f64, ars: f64) -> Vec<MetricSummary> {
    FOLD_OFFSETS
        .iter()
        .map(|&o| MetricSummary {
            n: 30,
            pa_pct: spread(pa, o),
            dr_pct: spread(dr, o),
            nrr_pct: spread(nrr, o),
            ss_pct: spread(ss, o),
            ss_consistency_pct: spread(ss, o) / 2.0,
            ars_s: spread(ars, o),
        })
        .collect()
}

pub fn five_model_summaries() -> (RunLock, BTreeMap<String, Vec<MetricSummary>>) {
    let models: Vec<&str> = FIVE_MODELS.iter().map(|r| r.0).collect();
    let summaries = FIVE_MODELS
        .iter()
        .map(|&(m, pa, ss, dr, nrr, ars)| (m.to_string(), recorded_folds(pa, ss, dr, nrr, ars)))
        .collect();
    (summary_lock("five_models", &models, FOLD_OFFSETS.len()), summaries)
}

pub fn eleven_model_summaries() -> (RunLock, BTreeMap<String, Vec<MetricSummary>>) {
    let models: Vec<&str> = ELEVEN_MODELS.iter().map(|r| r.0).collect();
    let summaries = ELEVEN_MODELS
        .iter()
        .map(|&(m, pa, dr, nrr, ars, ss)| (m.to_string(), recorded_folds(pa, ss, dr, nrr, ars)))
        .collect();
    (summary_lock("eleven_models", &models, FOLD_OFFSETS.len()), summaries)
}

pub fn grid_csv() -> String {
    let mut out = String::from("system");
    for u in GRID_USERS {
        out.push(',');
        out.push_str(u);
    }
    out.push_str(",mean\n");
    for (s, row) in GRID_SYSTEMS.iter().zip(GRID_PA) {
        out.push_str(s);
        for v in row {
            out.push_str(&format!(",{v:.1}"));
        }
        out.push_str(&format!(",{:.1}\n", row.iter().sum::<f64>() / row.len() as f64));
    }
    out
}

pub fn ablation_csv() -> String {
    let mut out = String::from("size,model_id,pa_pct\n");
    for (size, pa) in ABLATION_POINTS {
        out.push_str(&format!("{size},{},{pa:.1}\n", ablation_model(size)));
    }
    out
}

pub fn ablation_model(size: usize) -> String {
    format!("{GRID_MODEL}-{size}")
}

/// `3 * per_class` short synthetic licenses with distinct texts.
pub fn large_corpus(per_class: usize) -> Corpus {
    let mut records = Vec::with_capacity(3 * per_class);
    for label in Label::GROUND_TRUTH {
        for n in 0..per_class {
            let id = format!("{}-{n:04}", label.as_str());
            let category = Category::ALL[n % 3];
            let clause = match label {
                Label::AllowsCommercial => "Use for any purpose is granted with attribution.",
                Label::DeniesCommercial => "Use is limited to non-commercial research.",
                _ => "Reuse conditions are set by the original authors.",
            };
            records.push(LicenseRecord {
                id: id.clone(),
                name: format!("Synthetic {id}"),
                platform: Platform(platform(category, n).into()),
                category,
                text: format!("Dataset {id} terms. {clause}"),
                url: None,
                label,
                rationale: None,
                rights_obligations: None,
                status: RecordStatus::Valid,
            });
        }
    }
    Corpus::new(records).unwrap()
}

/// The `round(pa% * n)` records a model answers correctly, taken from a salted hash order.
fn correct_set(corpus: &Corpus, pa: f64, salt: &str) -> std::collections::HashSet<String> {
    let n = corpus.len();
    let target = (pa / 100.0 * n as f64).round() as usize;
    let mut ids: Vec<(f64, &str)> = corpus.iter().map(|r| (unit(&format!("{salt}/{}", r.id)), r.id.as_str())).collect();
    ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    ids.into_iter().take(target).map(|(_, id)| id.to_string()).collect()
}

fn add_answers(
    store: &mut ReplayStore,
    corpus: &Corpus,
    model: &str,
    system_id: &str,
    user_id: &str,
    pa: f64,
    vague_wrong: bool,
) {
    let pack = TemplatePack::builtin();
    let config = ModelEndpointConfig::offline(model);
    let correct = correct_set(corpus, pa, &format!("{model}/{system_id}/{user_id}"));
    for (i, record) in corpus.iter().enumerate() {
        let prompt = render(&pack, system_id, user_id, record).unwrap();
        let text = if correct.contains(&record.id) {
            verdict_text(record.label, i)
        } else if vague_wrong {
            NON_SPECIFIC[i % 2]
        } else {
            verdict_text(other_label(record.label, i), i)
        };
        store.insert(ReplayEntry {
            fp: prompt_fingerprint(&config, &prompt),
            text: text.to_string(),
            latency_s: 1.0 + (i % 7) as f64 * 0.25,
            embedding: None,
        });
    }
}

/// Recorded grid answers: one model across every (system, user) cell.
pub fn grid_replay(corpus: &Corpus) -> ReplayStore {
    let mut store = ReplayStore::default();
    for (s, row) in GRID_SYSTEMS.iter().zip(GRID_PA) {
        for (u, pa) in GRID_USERS.iter().zip(row) {
            add_answers(&mut store, corpus, GRID_MODEL, s, u, pa, *s == "sys_v4");
        }
    }
    store
}

/// Recorded answers of one tuned endpoint per training size.
pub fn ablation_replay(corpus: &Corpus, points: &[(usize, f64)]) -> ReplayStore {
    let mut store = ReplayStore::default();
    for &(size, pa) in points {
        add_answers(&mut store, corpus, &ablation_model(size), SAMPLE_SYSTEM, SAMPLE_USER, pa, false);
    }
    store
}

/// Writes a corpus, replay store and replay manifest for a large generated run into `dir`.
pub fn write_large_run(dir: &Path, run_id: &str, model_ids: &[String], corpus: &Corpus, store: &ReplayStore) -> RunManifest {
    std::fs::create_dir_all(dir).unwrap();
    save_corpus_jsonl(corpus, std::fs::File::create(dir.join("corpus.jsonl")).unwrap()).unwrap();
    store.save(&dir.join("replay.jsonl")).unwrap();
    let manifest = RunManifest {
        run_id: run_id.into(),
        corpus_path: "corpus.jsonl".into(),
        k: LARGE_K,
        model_ids: model_ids.to_vec(),
        ..sample_manifest()
    };
    let manifest = RunManifest {
        replay_path: Some("replay.jsonl".into()),
        ..manifest
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    RunManifest::load(&path).unwrap()
}

/// Writes every committed fixture into `out`.
pub fn write_committed(out: &Path) -> std::io::Result<()> {
    use std::fs;
    fs::create_dir_all(out)?;
    let corpus = sample_corpus();
    save_corpus_jsonl(&corpus, fs::File::create(out.join("corpus_sample.jsonl"))?)?;
    sample_replay(&corpus)
        .save(&out.join("sample_replay.jsonl"))
        .map_err(std::io::Error::other)?;
    let mut manifest = serde_json::to_string_pretty(&sample_manifest())?;
    manifest.push('\n');
    fs::write(out.join("sample_manifest.json"), manifest)?;

    fs::write(out.join("filter_sample.jsonl"), filter_sample_jsonl())?;
    save_corpus_jsonl(&category_corpus(), fs::File::create(out.join("category_metadata.jsonl"))?)?;

    for (name, (lock, summaries)) in [
        ("five_model_summary", five_model_summaries()),
        ("eleven_model_summary", eleven_model_summaries()),
    ] {
        persist_summary(&out.join(name), &lock, &summaries).map_err(std::io::Error::other)?;
    }
    fs::write(out.join("grid_pa_expected.csv"), grid_csv())?;
    fs::write(out.join("ablation_expected.csv"), ablation_csv())
}
