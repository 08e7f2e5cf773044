//! Rule-based caption rewriter behind `MockReply::Paraphrase`.
//!
//! It imitates what a grammar-correcting chat model does to a caption
//! (capitalization, final period, spelling fixes, varied wording) without any
//! randomness: the output depends only on the input text and the sample index.

const SPELLING: &[(&str, &str)] = &[
    ("builings", "buildings"),
    ("bulding", "building"),
    ("surounded", "surrounded"),
    ("severl", "several"),
    ("locatd", "located"),
    ("midle", "middle"),
];

/// Multi-word patterns; the first alternative is the pattern itself.
const PHRASES: &[&[&str]] = &[
    &[
        "in the middle of the image",
        "at the center of the scene",
        "in the middle of the picture",
        "in the heart of the frame",
    ],
    &[
        "are parked next to",
        "are parked alongside",
        "sit parked beside",
        "wait beside",
    ],
    &[
        "are surrounded by",
        "are encircled by",
        "sit amid",
        "lie among",
    ],
    &[
        "is surrounded by",
        "is encircled by",
        "sits amid",
        "is ringed by",
    ],
    &["are located in", "sit in", "lie in", "occupy"],
    &[
        "there are many",
        "numerous",
        "plenty of",
        "a large number of",
    ],
    &["are near", "sit near", "lie close to", "stand beside"],
    &["are around", "surround", "encircle", "ring"],
    &["are beside", "sit alongside", "lie next to", "border"],
    &["is next to", "sits beside", "lies alongside", "borders"],
    &[
        "in this area",
        "in this region",
        "nearby",
        "in the vicinity",
    ],
    &["a lot of", "plenty of", "numerous", "many"],
    &["next to", "alongside", "beside", "adjacent to"],
    &["many", "several", "numerous", "lots of"],
    &["some", "a few", "several", "scattered"],
    &["several", "a number of", "various", "multiple"],
    &["green", "verdant", "lush", "leafy"],
    &["trees", "woods", "greenery", "vegetation"],
    &["buildings", "structures", "houses", "blocks"],
    &["plants", "shrubs", "bushes", "vegetation"],
    &["road", "street", "lane", "roadway"],
    &["roads", "streets", "lanes", "roadways"],
    &["long", "lengthy", "extended", "elongated"],
];

const FRAMES: &[&str] = &[
    "",
    "in this image, ",
    "from above, ",
    "this aerial view shows that ",
    "here, ",
];

fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .map(|w| {
            SPELLING
                .iter()
                .find(|(bad, _)| *bad == w)
                .map(|(_, good)| good.to_string())
                .unwrap_or(w)
        })
        .collect()
}

pub fn paraphrase(text: &str, sample: u32) -> String {
    let words = normalize(text);
    let sample = sample as usize;
    let mut out: Vec<String> = Vec::with_capacity(words.len() + 4);
    let mut i = 0;
    while i < words.len() {
        let hit = PHRASES
            .iter()
            .filter_map(|alts| {
                let pattern: Vec<&str> = alts[0].split(' ').collect();
                let end = i + pattern.len();
                (end <= words.len() && words[i..end].iter().zip(&pattern).all(|(a, b)| a == b))
                    .then_some((alts, pattern.len()))
            })
            .max_by_key(|(_, len)| *len);
        match hit {
            Some((alts, len)) => {
                out.push(alts[(sample + 1 + i) % alts.len()].to_string());
                i += len;
            }
            None => {
                out.push(words[i].clone());
                i += 1;
            }
        }
    }
    let body = format!("{}{}", FRAMES[sample % FRAMES.len()], out.join(" "));
    let mut chars = body.chars();
    match chars.next() {
        Some(first) => format!("{}{}.", first.to_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let cap = "many planes are parked next to a long building in an airport .";
        let outs: Vec<String> = (0..5).map(|s| paraphrase(cap, s)).collect();
        assert_eq!(outs, (0..5).map(|s| paraphrase(cap, s)).collect::<Vec<_>>());
        let mut unique = outs.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 5);
        assert!(outs
            .iter()
            .all(|o| o.ends_with('.') && o.chars().next().unwrap().is_uppercase()));
    }

    #[test]
    fn fixes_known_misspellings() {
        let out = paraphrase("some houses are surounded by builings", 0);
        assert!(
            !out.contains("surounded") && !out.contains("builings"),
            "{out}"
        );
    }

    #[test]
    fn empty_text() {
        assert_eq!(paraphrase("  . ", 0), "");
    }
}
