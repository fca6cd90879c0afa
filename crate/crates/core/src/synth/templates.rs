//! Phrase families for simulated telephone conversations. Each template is
//! expanded by filling `{slot}` markers from the slot lists below, which
//! gives dozens of surface patterns per family from a small vocabulary.

use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Greeting,
    Question,
    Answer,
    Statement,
    Backchannel,
    Opener,
    Closing,
}

const NOUNS: &[&str] = &[
    "game", "movie", "food", "news", "car", "house", "job", "dog", "cat", "book", "show", "team", "weather",
    "school", "music", "garden", "computer", "weekend", "vacation", "kids", "church", "city", "park", "beer",
];
const PLACES: &[&str] = &[
    "the beach", "the city", "new york", "the park", "the store", "the mountains", "texas", "california",
    "the lake", "chicago", "florida", "the office",
];
const TIMES: &[&str] = &[
    "last week", "yesterday", "this morning", "every day", "on sunday", "last year", "all the time", "at night",
    "in the summer",
];
const PEOPLE: &[&str] = &[
    "my wife", "my husband", "my brother", "my sister", "my mom", "my dad", "my friend", "my boss", "my son",
    "my daughter",
];
const VERBS: &[&str] = &[
    "watched", "bought", "fixed", "cooked", "visited", "read", "saw", "liked", "played", "cleaned", "sold", "found",
];
const ADJS: &[&str] = &[
    "great", "fun", "hard", "nice", "crazy", "expensive", "boring", "interesting", "terrible", "cold", "awesome",
    "different",
];
const NAMES: &[&str] = &["john", "mary", "mike", "linda", "bob", "susan", "david", "karen"];

const GREETINGS: &[&str] = &[
    "hi",
    "hello",
    "hey there",
    "hi my name is {name}",
    "hello this is {name}",
    "good morning",
    "hi this is {name} from {place}",
];
const QUESTIONS: &[&str] = &[
    "how are you",
    "how about you",
    "what about you",
    "what do you think",
    "do you like {noun}",
    "have you been to {place}",
    "did you see the {noun}",
    "what do you do for fun",
    "do you have any kids",
    "where do you live",
    "how was your {noun}",
    "are you a fan of {noun}",
    "what kind of {noun} do you like",
    "do you ever go to {place}",
    "is that right",
    "have you ever {verb} a {noun}",
    "what did you think of the {noun}",
    "do you know what i mean",
    "how long have you lived in {place}",
    "was it {adj}",
];
const ANSWERS: &[&str] = &[
    "i am good",
    "i am fine thanks",
    "not bad",
    "yes i do",
    "no not really",
    "oh yeah definitely",
    "well i think so",
    "i guess so",
    "absolutely",
    "yeah i have",
    "no i have not",
    "i am not sure",
    "oh i love {noun}",
    "i live in {place}",
    "yeah it was {adj}",
    "pretty good",
    "i do not know",
    "nice to meet you {name}",
    "hi {name}",
    "yeah we have two kids",
    "honestly it was {adj}",
];
const STATEMENTS: &[&str] = &[
    "i {verb} the {noun} {time}",
    "{person} {verb} the {noun} {time}",
    "we went to {place} {time}",
    "it was really {adj}",
    "the {noun} was {adj}",
    "i think the {noun} is {adj}",
    "we usually go to {place}",
    "{person} likes the {noun}",
    "i have to work {time}",
    "that is why i like {noun}",
    "we have a {noun} at home",
    "i used to live in {place}",
    "{person} {verb} a {noun}",
    "the {noun} here is {adj}",
    "it gets {adj} {time}",
];
const BACKCHANNELS: &[&str] = &[
    "yeah", "uh huh", "right", "okay", "mm hmm", "oh really", "wow", "i see", "oh no", "sure", "exactly", "yeah yeah",
];
const OPENERS: &[&str] = &["well", "so", "oh", "yeah but", "you know", "actually", "see"];
const CLOSINGS: &[&str] = &[
    "okay bye",
    "well it was nice talking to you",
    "talk to you later",
    "bye bye",
    "take care",
    "okay have a good one",
];

fn templates(family: Family) -> &'static [&'static str] {
    match family {
        Family::Greeting => GREETINGS,
        Family::Question => QUESTIONS,
        Family::Answer => ANSWERS,
        Family::Statement => STATEMENTS,
        Family::Backchannel => BACKCHANNELS,
        Family::Opener => OPENERS,
        Family::Closing => CLOSINGS,
    }
}

fn slot(name: &str) -> &'static [&'static str] {
    match name {
        "noun" => NOUNS,
        "place" => PLACES,
        "time" => TIMES,
        "person" => PEOPLE,
        "verb" => VERBS,
        "adj" => ADJS,
        "name" => NAMES,
        other => panic!("unknown template slot {other}"),
    }
}

fn expand<R: Rng>(template: &str, rng: &mut R) -> Vec<String> {
    let mut out = Vec::new();
    for piece in template.split_whitespace() {
        match piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
            Some(name) => {
                let fill = slot(name).choose(rng).expect("slot lists are nonempty");
                out.extend(fill.split_whitespace().map(str::to_string));
            }
            None => out.push(piece.to_string()),
        }
    }
    out
}

/// One phrase from `family`.
pub fn phrase<R: Rng>(family: Family, rng: &mut R) -> Vec<String> {
    let t = templates(family).choose(rng).expect("families are nonempty");
    expand(t, rng)
}

/// Every word any template can produce.
pub fn vocabulary() -> Vec<&'static str> {
    let families = [
        GREETINGS, QUESTIONS, ANSWERS, STATEMENTS, BACKCHANNELS, OPENERS, CLOSINGS,
    ];
    let slots = [NOUNS, PLACES, TIMES, PEOPLE, VERBS, ADJS, NAMES];
    let mut words: Vec<&str> = families
        .iter()
        .chain(&slots)
        .flat_map(|list| list.iter().flat_map(|t| t.split_whitespace()))
        .filter(|w| !w.starts_with('{'))
        .collect();
    words.sort_unstable();
    words.dedup();
    words
}

/// Number of distinct surface patterns a family can produce.
pub fn pattern_count(family: Family) -> usize {
    templates(family)
        .iter()
        .map(|t| {
            t.split_whitespace()
                .filter_map(|p| p.strip_prefix('{').and_then(|p| p.strip_suffix('}')))
                .map(|s| slot(s).len())
                .product::<usize>()
        })
        .sum()
}
