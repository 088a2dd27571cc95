//! Shipped sites. Each has a transition table documented in the README.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimSiteSpec;

const POPUP_MENU: &str = include_str!("../../fixtures/popup-menu.json");
const SEARCH_SITE: &str = include_str!("../../fixtures/search-site.json");
const FLIGHT_WIDGET: &str = include_str!("../../fixtures/flight-widget.json");
const PRICING_SITE: &str = include_str!("../../fixtures/pricing-site.json");
const NESTED_MENU: &str = include_str!("../../fixtures/nested-menu.html");

pub const NOISY_ELEMENT_COUNT: usize = 3000;
pub const NOISY_SEED: u64 = 3189;
pub const NOISY_URL: &str = "https://noisy.test/";

pub const NAMES: &[&str] = &[
    "popup-menu",
    "search-site",
    "flight-widget",
    "pricing-site",
    "noisy-3000",
];

fn shipped(json: &str) -> SimSiteSpec {
    SimSiteSpec::from_json(json).expect("shipped fixture is valid JSON")
}

pub fn popup_menu() -> SimSiteSpec {
    shipped(POPUP_MENU)
}

pub fn search_site() -> SimSiteSpec {
    shipped(SEARCH_SITE)
}

pub fn flight_widget() -> SimSiteSpec {
    shipped(FLIGHT_WIDGET)
}

pub fn pricing_site() -> SimSiteSpec {
    shipped(PRICING_SITE)
}

/// Single page with exactly [`NOISY_ELEMENT_COUNT`] elements.
pub fn noisy_3000() -> SimSiteSpec {
    SimSiteSpec {
        name: "noisy-3000".into(),
        start_url: NOISY_URL.into(),
        pages: [(
            NOISY_URL.to_string(),
            noisy_page(NOISY_ELEMENT_COUNT, NOISY_SEED),
        )]
        .into(),
        transitions: Vec::new(),
    }
}

pub fn nested_menu_html() -> &'static str {
    NESTED_MENU
}

pub fn by_name(name: &str) -> Option<SimSiteSpec> {
    Some(match name {
        "popup-menu" => popup_menu(),
        "search-site" => search_site(),
        "flight-widget" => flight_widget(),
        "pricing-site" => pricing_site(),
        "noisy-3000" => noisy_3000(),
        _ => return None,
    })
}

pub fn all() -> Vec<SimSiteSpec> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}

const WORDS: &[&str] = &[
    "offer",
    "limited",
    "today",
    "member",
    "deal",
    "price",
    "review",
    "story",
    "update",
    "latest",
    "trending",
    "shipping",
    "free",
    "returns",
    "popular",
    "account",
    "weekly",
    "digest",
    "season",
    "collection",
];

const CLASSES: &[&str] = &[
    "flex items-center justify-between",
    "px-4 py-2 md:px-6",
    "text-sm text-gray-600 leading-tight",
    "grid grid-cols-12 gap-4",
    "hidden lg:block",
    "rounded-md shadow-sm ring-1 ring-black/5",
    "w-full max-w-screen-xl mx-auto",
    "truncate font-medium tracking-wide",
];

/// A page of ad-hoc layout noise with exactly `elements` elements
/// (html, head and body included) for a given seed. Minimum 12.
pub fn noisy_page(elements: usize, seed: u64) -> String {
    assert!(elements >= 12, "noisy page needs at least 12 elements");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(elements * 80);
    // html, head, title, meta, style, script, body, header, h1, form, input, button: 12
    out.push_str(
        "<!DOCTYPE html><html><head><title>Deals and more</title><meta charset=\"utf-8\">",
    );
    out.push_str("<style>.a{color:red}.b{margin:0 auto}.c{display:flex}</style>");
    out.push_str("<script>window.dataLayer=window.dataLayer||[];function t(){dataLayer.push(arguments)}</script>");
    out.push_str("</head><body><header><h1>Deals and more</h1>");
    out.push_str("<form role=\"search\"><input id=\"q\" name=\"q\" type=\"search\" aria-label=\"Search\"><button type=\"submit\">Search</button></form></header>");
    let mut remaining = elements - 12;
    let mut link = 0usize;
    while remaining > 0 {
        let size = rng.gen_range(1..=remaining.min(40));
        subtree(&mut rng, &mut out, size, false, &mut link);
        remaining -= size;
    }
    out.push_str("</body></html>");
    out
}

fn phrase(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Emits exactly `size` elements. Inline parents only get inline children.
fn subtree(rng: &mut ChaCha8Rng, out: &mut String, size: usize, inline: bool, link: &mut usize) {
    let class = CLASSES[rng.gen_range(0..CLASSES.len())];
    if size == 1 {
        match rng.gen_range(0..20) {
            0 | 1 => {
                *link += 1;
                out.push_str(&format!(
                    "<a class=\"{class}\" href=\"https://noisy.test/item/{}\">{}</a>",
                    *link,
                    phrase(rng)
                ));
            }
            2 if !inline => out.push_str("<script>t('event','view')</script>"),
            _ => out.push_str(&format!("<span class=\"{class}\">{}</span>", phrase(rng))),
        }
        return;
    }
    let tag = if inline { "span" } else { "div" };
    out.push_str(&format!(
        "<{tag} class=\"{class}\" data-track=\"{}\">",
        rng.gen_range(1000..9999)
    ));
    let mut left = size - 1;
    while left > 0 {
        let child = rng.gen_range(1..=left);
        let child_inline = inline || rng.gen_bool(0.3);
        subtree(rng, out, child, child_inline, link);
        left -= child;
    }
    out.push_str(&format!("</{tag}>"));
}
