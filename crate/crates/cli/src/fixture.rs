//! Generates a self-contained synthetic venue: listing pages, PDFs with and
//! without trigger sentences, and a config that points at them through
//! `file://` URLs.

use std::collections::BTreeMap;
use std::path::Path;

use audit_core::corpus::{article_id, VenueConfig};
use audit_core::digest::write_atomic;
use audit_core::rng::Xoshiro256StarStar;
use audit_extract::writer::{layout_paragraphs, write_pdf, TextEncoding, WriterOptions};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::config::{FetchConfig, RunConfig, SampleConfig, ServiceConfig};
use crate::error::CliError;

pub const FIXTURE_VENUE: &str = "synthetic-phm";

const ENTRY_RULE: &str = r#"<li class="paper"><a class="title" href="(?P<landing_url>[^"]+)">(?P<title>[^<]+)</a>\s*<span class="year">(?P<year>\d{4})</span>\s*<a class="pdf" href="(?P<pdf_url>[^"]+)">"#;

/// Filler prose that none of the shipped patterns can match.
const FILLER: [&str; 16] = [
    "Rolling element bearings are a frequent cause of unplanned downtime in rotating machinery.",
    "Vibration signals were recorded at the drive end of the test rig with a sampling rate of 12 kHz.",
    "The health indicator is computed from the kurtosis of the envelope spectrum.",
    "A recurrent network estimates the remaining useful life of each unit from sensor histories.",
    "Results show a clear reduction of the prediction error compared with the baseline model.",
    "Feature extraction relies on wavelet packet decomposition of the raw acceleration signal.",
    "Flank wear of the cutting tool was measured after every pass with an optical microscope.",
    "The degradation trajectory follows an exponential trend after the onset of the fault.",
    "Table 3 summarizes the prognostic metrics for all test units under each operating condition.",
    "Maintenance actions are scheduled according to the predicted failure time and its uncertainty.",
    "A particle filter updates the model parameters as new measurements arrive from the field.",
    "Temperature and pressure sensors were sampled once per operating cycle of the engine.",
    "Future work will examine transfer learning across machines and operating regimes.",
    "The authors thank the industrial partners for access to the test bench and technical support.",
    "Each run-to-failure experiment lasted between six and fourteen hours of continuous operation.",
    "Spectral kurtosis highlights the frequency band in which impulsive fault signatures dominate.",
];

/// One sentence per planted article; each triggers a shipped pattern.
pub const TRIGGERS: [&str; 7] = [
    "All experiments used the publicly available CWRU bearing dataset.",
    "The proposed toolbox is released as open-source software.",
    "The code for this study is available in a public repository.",
    "We used the NASA turbofan dataset for validation.",
    "An open source implementation accompanies this article.",
    "Source code and trained models are available upon request.",
    "The analysis used the PRONOSTIA dataset.",
];

const TITLES: [&str; 10] = [
    "Bearing fault prognosis",
    "Tool wear estimation in milling",
    "Remaining useful life of turbofan engines",
    "Battery capacity fade modelling",
    "Gearbox crack detection",
    "Health indicators for wind turbines",
    "Pump cavitation monitoring",
    "Degradation modelling of lithium-ion cells",
    "Spindle thermal error compensation",
    "Fault diagnosis of planetary gearboxes",
];

/// What the generator planted, for checking pipeline output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub venue_id: String,
    pub planted: Vec<String>,
    pub control: Vec<String>,
}

fn body(rng: &mut Xoshiro256StarStar, trigger: Option<&str>) -> Vec<String> {
    let n_paras = 4 + rng.below(3) as usize;
    let mut paras: Vec<String> = (0..n_paras)
        .map(|_| {
            let n = 3 + rng.below(2) as usize;
            (0..n).map(|_| FILLER[rng.below(FILLER.len() as u64) as usize]).collect::<Vec<_>>().join(" ")
        })
        .collect();
    if let Some(t) = trigger {
        let at = rng.below(n_paras as u64) as usize;
        let mut sentences: Vec<&str> = paras[at].split_inclusive(". ").collect();
        let pos = rng.below(sentences.len() as u64 + 1) as usize;
        let with_space = format!("{t} ");
        sentences.insert(pos, &with_space);
        paras[at] = sentences.concat().trim().to_string();
    }
    paras
}

/// Writes the fixture under `out` and returns the ground truth.
pub fn generate(out: &Path, articles: usize, planted: usize) -> Result<FixtureTruth, CliError> {
    if planted > articles || planted > TRIGGERS.len() * 8 {
        return Err(CliError::Usage(format!("cannot plant {planted} of {articles} articles")));
    }
    let out = if out.is_absolute() {
        out.to_path_buf()
    } else {
        std::env::current_dir()
            .map_err(|e| CliError::Stage(e.to_string()))?
            .join(out)
    };
    let site = out.join("site");
    let list_dir = site.join("list");
    let pdf_dir = site.join("pdfs");
    for d in [&list_dir, &pdf_dir] {
        std::fs::create_dir_all(d).map_err(|e| CliError::Stage(format!("{}: {e}", d.display())))?;
    }
    let list_url = Url::from_directory_path(&list_dir)
        .map_err(|_| CliError::Stage(format!("{} is not a valid file URL", list_dir.display())))?;

    // Spread planted articles over the list deterministically.
    let mut rng = Xoshiro256StarStar::seed_from_u64(0x5EED);
    let mut order: Vec<usize> = (0..articles).collect();
    rng.shuffle(&mut order);
    let planted_slots: std::collections::BTreeSet<usize> = order[..planted].iter().copied().collect();

    let per_page = articles.div_ceil(2).max(1);
    let mut pages: Vec<String> = vec![String::new(); articles.div_ceil(per_page).max(1)];
    let mut truth = FixtureTruth { venue_id: FIXTURE_VENUE.into(), planted: Vec::new(), control: Vec::new() };
    let mut trigger_no = 0;
    for i in 0..articles {
        let name = format!("paper-{:02}", i + 1);
        let title = format!("{} {}", TITLES[i % TITLES.len()], i + 1);
        let year = 2015 + (i % 7) as i32;
        let trigger = planted_slots.contains(&i).then(|| {
            let t = TRIGGERS[trigger_no % TRIGGERS.len()];
            trigger_no += 1;
            t
        });
        let mut paragraphs = vec![title.clone()];
        paragraphs.extend(body(&mut rng, trigger));
        let opts = WriterOptions {
            compress: i % 2 == 0,
            xref_stream: (i / 2) % 2 == 1,
            encoding: [TextEncoding::WinAnsi, TextEncoding::WinAnsiTjArray, TextEncoding::IdentityToUnicode][(i / 4) % 3],
            encrypt: false,
        };
        let pdf = write_pdf(&layout_paragraphs(&paragraphs, 88), &opts);
        write_atomic(&pdf_dir.join(format!("{name}.pdf")), &pdf)?;

        let pdf_url = list_url.join(&format!("../pdfs/{name}.pdf")).expect("relative file URL");
        let id = article_id(FIXTURE_VENUE, pdf_url.as_str());
        if trigger.is_some() {
            truth.planted.push(id);
        } else {
            truth.control.push(id);
        }
        pages[i / per_page].push_str(&format!(
            "  <li class=\"paper\"><a class=\"title\" href=\"../pdfs/{name}.html\">{title}</a> \
             <span class=\"year\">{year}</span> <a class=\"pdf\" href=\"../pdfs/{name}.pdf\">PDF</a></li>\n"
        ));
    }
    for (p, items) in pages.iter().enumerate() {
        let html = format!(
            "<!doctype html>\n<html><head><title>Synthetic proceedings, page {}</title></head>\n<body>\n<ul>\n{items}</ul>\n</body></html>\n",
            p + 1
        );
        write_atomic(&list_dir.join(format!("{}.html", p + 1)), html.as_bytes())?;
    }
    truth.planted.sort();
    truth.control.sort();

    let cfg = RunConfig {
        workspace_dir: "workspace".into(),
        patterns_path: None,
        sample: SampleConfig { seed: 2021, k: articles, year_range: Some((2015, 2021)) },
        fetch: FetchConfig { per_host_delay_ms: 0, backoff_ms: 10, timeout_ms: 5_000, ..FetchConfig::default() },
        service: ServiceConfig::default(),
        manual_index: BTreeMap::new(),
        venues: vec![VenueConfig {
            venue_id: FIXTURE_VENUE.into(),
            display_name: "Synthetic PHM proceedings".into(),
            listing_url_template: format!("{list_url}{{page}}.html"),
            page_range: (1, pages.len() as u32),
            entry_rules: vec![ENTRY_RULE.into()],
            min_delay_ms: 0,
            year_filter: None,
        }],
    };
    let toml = toml::to_string(&cfg).map_err(|e| CliError::Stage(format!("config serialization: {e}")))?;
    write_atomic(&out.join("audit.toml"), toml.as_bytes())?;
    let mut json = serde_json::to_vec_pretty(&truth).expect("truth serializes");
    json.push(b'\n');
    write_atomic(&out.join("planted.json"), &json)?;
    Ok(truth)
}
