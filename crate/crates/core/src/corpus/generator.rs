//! Grammar-based synthetic corpus of in-vehicle passenger commands.
//!
//! Template syntax, one whitespace-separated item at a time:
//!
//! * `*word`: intent keyword (`Intent`, slot `None`)
//! * `word@Slot`: literal token carrying a slot type
//! * `$Slot`: a filler drawn from that slot's lexicon (may span tokens)
//! * `word`: plain token (`None`, `NonIntent`)

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::schema::{Intent, KeywordLabel, Label, SlotLabel};
use super::Utterance;
use crate::error::{NluError, Result};
use crate::numerics::{SeedStream, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct Template(pub String);

#[derive(Clone, Debug, PartialEq)]
enum Item {
    Keyword(String),
    Literal(String, SlotLabel),
    Filler(SlotLabel),
}

impl Template {
    fn items(&self) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        for part in self.0.split_whitespace() {
            let item = if let Some(w) = part.strip_prefix('*') {
                Item::Keyword(w.to_string())
            } else if let Some(slot) = part.strip_prefix('$') {
                Item::Filler(parse_slot(slot, &self.0)?)
            } else if let Some((w, slot)) = part.split_once('@') {
                Item::Literal(w.to_string(), parse_slot(slot, &self.0)?)
            } else {
                Item::Literal(part.to_string(), SlotLabel::None)
            };
            items.push(item);
        }
        if items.is_empty() {
            return Err(NluError::Config("empty template".into()));
        }
        Ok(items)
    }
}

fn parse_slot(name: &str, template: &str) -> Result<SlotLabel> {
    match SlotLabel::parse(name) {
        Some(SlotLabel::None) | None => Err(NluError::Config(format!("bad slot `{name}` in template {template:?}"))),
        Some(s) => Ok(s),
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Sampling weight per intent, in schema order.
    pub intent_weights: Vec<f64>,
    pub templates: BTreeMap<Intent, Vec<Template>>,
    pub lexicons: BTreeMap<SlotLabel, Vec<String>>,
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    /// Synonym swaps used as paraphrase noise.
    pub synonyms: Vec<(String, String)>,
    /// Minimum fraction of utterances that receive a synonym swap.
    pub noise_rate: f64,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn templates(v: &[&str]) -> Vec<Template> {
    v.iter().map(|s| Template(s.to_string())).collect()
}

impl GeneratorConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        use Intent::*;
        let mut t = BTreeMap::new();
        t.insert(
            SetChangeDest,
            templates(&[
                "*take $Person *to the $Location",
                "i *want to *go *to the $Location",
                "*change the destination *to the $Location",
                "*head *to the $Location",
                "let us *go *to the $Location $TimeGuidance",
                "*drive $Person *to the $Location",
                "*set the destination *to the $Location",
                "can you *take $Person *to the $Location",
                "i *need to *get *to the $Location",
                "*go *to the $Location instead",
            ]),
        );
        t.insert(
            SetChangeRoute,
            templates(&[
                "*turn $Position at the next intersection",
                "*turn $Position $Gesture",
                "*take a $Position at the $Location",
                "*change the route",
                "*take the highway",
                "*avoid the highway",
                "*go $Position at the $Location",
                "*make a $Position turn $TimeGuidance",
                "*take another route to avoid traffic",
                "*keep $Position",
            ]),
        );
        t.insert(
            GoFaster,
            templates(&[
                "*go *faster",
                "*speed *up",
                "*speed *up a little",
                "can you *drive *faster",
                "*hurry *up we are late",
                "*go *faster $TimeGuidance",
                "*accelerate a bit",
                "*increase the speed",
                "we need to *go *faster",
            ]),
        );
        t.insert(
            GoSlower,
            templates(&[
                "*slow *down",
                "*go *slower",
                "*drive *slower",
                "*reduce the speed",
                "*slow *down $TimeGuidance",
                "not so fast *slow *down",
                "you are *driving too fast",
                "*decrease the speed a bit",
            ]),
        );
        t.insert(
            Stop,
            templates(&[
                "*stop the car",
                "*stop $TimeGuidance",
                "*stop $Gesture",
                "*stop at the $Location",
                "*stop the car $TimeGuidance",
                "can you *stop $Gesture",
                "*brake $TimeGuidance",
                "i said *stop",
            ]),
        );
        t.insert(
            Park,
            templates(&[
                "*park the car",
                "*park $Gesture",
                "*park at the $Location",
                "*find a *parking spot",
                "*park in the $Location",
                "*park on the $Position side",
                "can you *park $Gesture",
                "*park near the $Location",
            ]),
        );
        t.insert(
            PullOver,
            templates(&[
                "*pull *over",
                "*pull *over $Gesture",
                "*pull *over at the $Location",
                "*pull *over to the $Position",
                "*pull *over $TimeGuidance",
                "*pull to the side of the road",
                "can you *pull *over on the $Position",
            ]),
        );
        t.insert(
            DropOff,
            templates(&[
                "*drop $Person *off at the $Location",
                "*drop $Person *off $Gesture",
                "*let $Person *out at the $Location",
                "*let $Person *out $Gesture",
                "you can *drop $Person *off $TimeGuidance",
                "*drop $Person at the $Location",
                "*let $Person *out $TimeGuidance",
            ]),
        );
        t.insert(
            OpenDoor,
            templates(&[
                "*open the door@Object",
                "*open the $Position door@Object",
                "*unlock the door@Object",
                "can you *open the door@Object for $Person",
                "*open my door@Object",
                "*open the doors@Object",
                "*unlock the doors@Object $TimeGuidance",
                "*open the door@Object $TimeGuidance",
            ]),
        );
        t.insert(
            Other,
            templates(&[
                "*turn *on the $Object",
                "*turn *off the $Object",
                "*open the window@Object",
                "*close the window@Object",
                "*open the trunk@Object",
                "*close the trunk@Object",
                "*show the map@Object",
                "*change the temperature@Object",
                "*play some music@Object",
                "*turn *up the volume@Object",
                "*turn *down the $Object",
                "*roll *down the window@Object",
            ]),
        );

        let mut lex = BTreeMap::new();
        lex.insert(
            SlotLabel::Location,
            strings(&[
                "airport", "hotel", "mall", "office", "stadium", "hospital", "library", "museum", "park",
                "restaurant", "school", "bank", "pharmacy", "gym", "market", "entrance", "corner", "bridge",
                "beach", "cafe", "university", "gas station", "bus stop", "parking lot", "main street",
                "city center", "train station", "coffee shop", "grocery store", "post office",
            ]),
        );
        lex.insert(
            SlotLabel::Position,
            strings(&["left", "right", "north", "south", "east", "west", "front", "back"]),
        );
        lex.insert(
            SlotLabel::Person,
            strings(&[
                "me", "us", "him", "her", "my friend", "my wife", "my husband", "my son", "my daughter",
                "the kids", "everyone",
            ]),
        );
        lex.insert(
            SlotLabel::Object,
            strings(&[
                "radio", "music", "heater", "lights", "air conditioning", "fan", "wipers", "ac", "seat heating",
                "navigation",
            ]),
        );
        lex.insert(
            SlotLabel::TimeGuidance,
            strings(&[
                "now", "right now", "immediately", "soon", "in a minute", "in five minutes", "as soon as possible",
                "later", "after the light",
            ]),
        );
        lex.insert(
            SlotLabel::Gesture,
            strings(&["here", "there", "over there", "this", "that", "this one", "that one", "right here", "right there"]),
        );

        Self {
            n,
            seed,
            intent_weights: vec![1.2, 1.0, 0.8, 0.8, 1.1, 1.0, 1.0, 1.0, 0.9, 1.2],
            templates: t,
            lexicons: lex,
            prefixes: strings(&["please", "hey", "okay", "so", "um"]),
            suffixes: strings(&["please", "thanks", "thank you"]),
            synonyms: [
                ("stop", "halt"),
                ("car", "vehicle"),
                ("take", "bring"),
                ("faster", "quicker"),
                ("hurry", "rush"),
                ("drop", "leave"),
                ("pull", "move"),
                ("go", "head"),
                ("want", "wish"),
                ("close", "shut"),
                ("route", "path"),
                ("speed", "pace"),
                ("please", "kindly"),
                ("door", "gate"),
                ("highway", "freeway"),
                ("show", "display"),
                ("play", "start"),
                ("park", "dock"),
                ("slow", "ease"),
                ("drive", "ride"),
                ("turn", "swing"),
                ("open", "unlatch"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
            noise_rate: 0.08,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(NluError::Config("need at least one utterance".into()));
        }
        if self.intent_weights.len() != Intent::count()
            || self.intent_weights.iter().any(|w| !w.is_finite() || *w <= 0.0)
        {
            return Err(NluError::Config("intent weights must be 10 positive numbers".into()));
        }
        if !(0.05..=1.0).contains(&self.noise_rate) {
            return Err(NluError::Config(format!("noise rate must lie in [0.05, 1], got {}", self.noise_rate)));
        }
        for intent in Intent::ALL {
            let ts = self.templates.get(intent).map(Vec::as_slice).unwrap_or_default();
            if ts.is_empty() {
                return Err(NluError::Config(format!("intent {intent} has no templates")));
            }
            for t in ts {
                for item in t.items()? {
                    if let Item::Filler(slot) = item {
                        if self.lexicons.get(&slot).is_none_or(|l| l.is_empty()) {
                            return Err(NluError::Config(format!("no lexicon for slot {slot}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Every token the generator can emit.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        let mut words = BTreeSet::new();
        let mut add = |s: &str| {
            for w in s.split_whitespace() {
                words.insert(w.to_string());
            }
        };
        for t in self.templates.values().flatten() {
            for part in t.0.split_whitespace() {
                if part.starts_with('$') {
                    continue;
                }
                let w = part.trim_start_matches('*');
                add(w.split('@').next().unwrap_or(w));
            }
        }
        self.lexicons.values().flatten().for_each(|s| add(s));
        self.prefixes.iter().chain(&self.suffixes).for_each(|s| add(s));
        for (a, b) in &self.synonyms {
            add(a);
            add(b);
        }
        words
    }

    /// Groups of words that should sit close together in a toy embedding
    /// space: one group per slot lexicon plus one per synonym pair.
    pub fn word_groups(&self) -> Vec<Vec<String>> {
        let mut groups: Vec<Vec<String>> = self
            .lexicons
            .values()
            .map(|l| l.iter().flat_map(|s| s.split_whitespace().map(str::to_string)).collect())
            .collect();
        groups.extend(self.synonyms.iter().map(|(a, b)| vec![a.clone(), b.clone()]));
        groups
    }
}

fn expand(
    items: &[Item],
    cfg: &GeneratorConfig,
    rng: &mut StreamRng,
    out: &mut (Vec<String>, Vec<SlotLabel>, Vec<KeywordLabel>),
) {
    let mut push = |tok: &str, slot, kw| {
        out.0.push(tok.to_string());
        out.1.push(slot);
        out.2.push(kw);
    };
    for item in items {
        match item {
            Item::Keyword(w) => push(w, SlotLabel::None, KeywordLabel::Intent),
            Item::Literal(w, slot) => push(w, *slot, KeywordLabel::NonIntent),
            Item::Filler(slot) => {
                let filler = cfg.lexicons[slot].choose(rng).expect("validated lexicon");
                for w in filler.split_whitespace() {
                    push(w, *slot, KeywordLabel::NonIntent);
                }
            }
        }
    }
}

fn plain(words: &str) -> Vec<Item> {
    words
        .split_whitespace()
        .map(|w| Item::Literal(w.to_string(), SlotLabel::None))
        .collect()
}

/// Samples `cfg.n` annotated utterances. Every intent appears at least once
/// when `n >= 10` (otherwise `n` distinct intents do) and the output is a
/// pure function of the config.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<Vec<Utterance>> {
    cfg.validate()?;
    let root = SeedStream::new(cfg.seed);
    let mut rng = root.derive("generate", 0).rng();

    let dist = WeightedIndex::new(&cfg.intent_weights).map_err(|e| NluError::Config(e.to_string()))?;
    let mut intents: Vec<Intent> = Intent::ALL.to_vec();
    if cfg.n < intents.len() {
        intents.shuffle(&mut rng);
        intents.truncate(cfg.n);
    }
    intents.extend((Intent::count()..cfg.n).map(|_| Intent::ALL[dist.sample(&mut rng)]));
    intents.shuffle(&mut rng);

    let synonyms: BTreeMap<&str, &str> = cfg.synonyms.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let mut drafts = Vec::with_capacity(cfg.n);
    for intent in intents {
        let template = cfg.templates[&intent].choose(&mut rng).expect("validated templates");
        let mut parts = (Vec::new(), Vec::new(), Vec::new());
        if rng.random_bool(0.25) {
            expand(&plain(cfg.prefixes.choose(&mut rng).expect("prefix")), cfg, &mut rng, &mut parts);
        }
        expand(&template.items()?, cfg, &mut rng, &mut parts);
        if rng.random_bool(0.15) {
            expand(&plain(cfg.suffixes.choose(&mut rng).expect("suffix")), cfg, &mut rng, &mut parts);
        }
        drafts.push((intent, parts));
    }

    // paraphrase noise: a fixed share of the swappable utterances gets one synonym swap
    let mut noise_rng = root.derive("noise", 0).rng();
    let mut swappable: Vec<usize> = (0..drafts.len())
        .filter(|&i| drafts[i].1 .0.iter().any(|t| synonyms.contains_key(t.as_str())))
        .collect();
    swappable.shuffle(&mut noise_rng);
    let target = ((cfg.noise_rate * cfg.n as f64).ceil() as usize).min(swappable.len());
    for &i in &swappable[..target] {
        let tokens = &mut drafts[i].1 .0;
        let positions: Vec<usize> = (0..tokens.len()).filter(|&p| synonyms.contains_key(tokens[p].as_str())).collect();
        let p = *positions.choose(&mut noise_rng).expect("swappable");
        tokens[p] = synonyms[tokens[p].as_str()].to_string();
    }

    drafts
        .into_iter()
        .enumerate()
        .map(|(i, (intent, (tokens, slots, keywords)))| Utterance::new(i as u64 + 1, tokens, slots, keywords, intent))
        .collect()
}

/// Writes GloVe-format text vectors for `words`. Words sharing a group get
/// nearby vectors; everything is derived from `seed`.
pub fn toy_vectors(words: &BTreeSet<String>, groups: &[Vec<String>], dim: usize, seed: u64) -> String {
    let root = SeedStream::new(seed).derive("toy_vectors", dim as u64);
    let mut centers: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (g, group) in groups.iter().enumerate() {
        let mut rng = root.derive("group", g as u64).rng();
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        for w in group {
            centers.entry(w.as_str()).or_insert_with(|| center.clone());
        }
    }
    let mut out = String::new();
    for w in words {
        let mut rng = root.derive(w, 0).rng();
        out.push_str(w);
        for j in 0..dim {
            let noise: f64 = rng.random_range(-0.5..0.5);
            let v = match centers.get(w.as_str()) {
                Some(c) => 0.7 * c[j] + 0.3 * noise,
                None => noise,
            };
            let _ = write!(out, " {v:.6}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, write_corpus};

    #[test]
    fn default_config_is_valid() {
        GeneratorConfig::new(100, 1).validate().unwrap();
        assert!(GeneratorConfig::new(0, 1).validate().is_err());
        let mut cfg = GeneratorConfig::new(100, 1);
        cfg.templates.remove(&Intent::Park);
        assert!(cfg.validate().is_err());
        let mut cfg = GeneratorConfig::new(100, 1);
        cfg.templates.insert(Intent::Park, vec![Template("*park $Nowhere".into())]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tiny_corpora_use_distinct_intents() {
        let c = generate_corpus(&GeneratorConfig::new(5, 2)).unwrap();
        assert_eq!(c.len(), 5);
        let intents: BTreeSet<Intent> = c.iter().map(|u| u.intent).collect();
        assert_eq!(intents.len(), 5);
        assert_eq!(parse_corpus(&write_corpus(&c)).unwrap(), c);
    }

    #[test]
    fn template_items() {
        let items = Template("*open the door@Object for $Person".into()).items().unwrap();
        assert_eq!(items[0], Item::Keyword("open".into()));
        assert_eq!(items[2], Item::Literal("door".into(), SlotLabel::Object));
        assert_eq!(items[4], Item::Filler(SlotLabel::Person));
    }

    #[test]
    fn generates_requested_count_with_every_intent() {
        let cfg = GeneratorConfig::new(200, 3);
        let c = generate_corpus(&cfg).unwrap();
        assert_eq!(c.len(), 200);
        for intent in Intent::ALL {
            assert!(c.iter().any(|u| u.intent == *intent), "{intent} missing");
        }
        let small = generate_corpus(&GeneratorConfig::new(10, 3)).unwrap();
        let present: BTreeSet<_> = small.iter().map(|u| u.intent).collect();
        assert_eq!(present.len(), 10);
    }

    #[test]
    fn noise_share_and_round_trip() {
        let cfg = GeneratorConfig::new(500, 9);
        let c = generate_corpus(&cfg).unwrap();
        let swapped: BTreeSet<&str> = cfg.synonyms.iter().map(|(_, b)| b.as_str()).collect();
        let noisy = c.iter().filter(|u| u.tokens.iter().any(|t| swapped.contains(t.as_str()))).count();
        assert!(noisy as f64 >= 0.05 * c.len() as f64, "only {noisy} noisy");
        let text = write_corpus(&c);
        assert_eq!(parse_corpus(&text).unwrap(), c);
        assert_eq!(text, write_corpus(&generate_corpus(&cfg).unwrap()));
    }

    #[test]
    fn keywords_and_slots_by_construction() {
        let c = generate_corpus(&GeneratorConfig::new(300, 5)).unwrap();
        for u in &c {
            assert!(u.keyword_tags.contains(&KeywordLabel::Intent), "{}", u.text());
            for (s, k) in u.slot_tags.iter().zip(&u.keyword_tags) {
                assert!(!(*s != SlotLabel::None && *k == KeywordLabel::Intent));
            }
        }
    }

    #[test]
    fn toy_vectors_cover_vocabulary() {
        let cfg = GeneratorConfig::new(10, 1);
        let words = cfg.vocabulary();
        let text = toy_vectors(&words, &cfg.word_groups(), 8, 1);
        assert_eq!(text.lines().count(), words.len());
        for line in text.lines() {
            assert_eq!(line.split(' ').count(), 9);
        }
        assert_eq!(text, toy_vectors(&words, &cfg.word_groups(), 8, 1));
    }
}
