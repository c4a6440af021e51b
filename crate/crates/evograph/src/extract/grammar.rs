//! Deterministic statement grammar used by the mock extraction backend and
//! by the statement router.
//!
//! A statement is tokenized into mentions, relation words, and temporal
//! references, then matched against a fixed pattern list (first match
//! wins, one proposition per statement):
//!
//! ```text
//! [In <time>,] <M> <verb> <M> [in|on <time>]      active event
//! [The] <M> is|was <participle> [in <time>] [by <M>]   passive event
//! <M> is also known as <M>                        alias triple
//! <M> is a|an <words>                             class triple
//! <M> has <word> <value>                          attribute triple
//! <M> <relation_word> <M|word>                    generic triple
//! ```
//!
//! Mentions are maximal runs of capitalized (or attached numeric) tokens;
//! `v1.21`-style tags, four-digit years, and month-day-year phrases become
//! temporal references, not mentions.

use crate::time::TimeRef;

/// Verb lexicon entry: lemma, surface forms, past participle, and the role
/// names assigned to the grammatical subject and object.
pub struct VerbEntry {
    pub lemma: &'static str,
    pub forms: &'static [&'static str],
    pub participle: &'static str,
    /// Role of the grammatical subject in the active voice.
    pub actor_role: &'static str,
    /// Role of the grammatical object (the entity undergoing the event).
    pub undergoer_role: &'static str,
}

pub const VERBS: &[VerbEntry] = &[
    VerbEntry { lemma: "acquire", forms: &["acquire", "acquires", "acquired"], participle: "acquired", actor_role: "acquirer", undergoer_role: "acquired" },
    VerbEntry { lemma: "announce", forms: &["announce", "announces", "announced"], participle: "announced", actor_role: "announcer", undergoer_role: "announced" },
    VerbEntry { lemma: "release", forms: &["release", "releases", "released"], participle: "released", actor_role: "releaser", undergoer_role: "released" },
    VerbEntry { lemma: "launch", forms: &["launch", "launches", "launched"], participle: "launched", actor_role: "launcher", undergoer_role: "launched" },
    VerbEntry { lemma: "found", forms: &["found", "founds", "founded"], participle: "founded", actor_role: "founder", undergoer_role: "founded" },
    VerbEntry { lemma: "deprecate", forms: &["deprecate", "deprecates", "deprecated"], participle: "deprecated", actor_role: "agent", undergoer_role: "subject" },
    VerbEntry { lemma: "remove", forms: &["remove", "removes", "removed"], participle: "removed", actor_role: "agent", undergoer_role: "subject" },
    VerbEntry { lemma: "discontinue", forms: &["discontinue", "discontinues", "discontinued"], participle: "discontinued", actor_role: "agent", undergoer_role: "subject" },
    VerbEntry { lemma: "rename", forms: &["rename", "renames", "renamed"], participle: "renamed", actor_role: "agent", undergoer_role: "subject" },
    VerbEntry { lemma: "replace", forms: &["replace", "replaces", "replaced"], participle: "replaced", actor_role: "replacement", undergoer_role: "subject" },
    VerbEntry { lemma: "supersede", forms: &["supersede", "supersedes", "superseded"], participle: "superseded", actor_role: "successor", undergoer_role: "subject" },
    VerbEntry { lemma: "succeed", forms: &["succeed", "succeeds", "succeeded"], participle: "succeeded", actor_role: "successor", undergoer_role: "subject" },
];

/// Look up the verb entry a surface form belongs to.
pub fn verb_for_form(word: &str) -> Option<&'static VerbEntry> {
    let w = word.to_ascii_lowercase();
    VERBS.iter().find(|v| v.forms.contains(&w.as_str()))
}

pub fn verb_for_lemma(lemma: &str) -> Option<&'static VerbEntry> {
    VERBS.iter().find(|v| v.lemma == lemma)
}

/// Past participle of a trigger lemma; falls back to the lemma itself.
pub fn participle_of(lemma: &str) -> &str {
    verb_for_lemma(lemma).map_or(lemma, |v| v.participle)
}

/// Lemmatize a single word via the verb table; identity for everything else.
pub fn lemma_of(word: &str) -> String {
    verb_for_form(word).map_or_else(|| word.to_ascii_lowercase(), |v| v.lemma.to_string())
}

const CAP_STOPWORDS: &[&str] = &[
    "The", "In", "On", "At", "It", "This", "That", "These", "Those", "And", "Or", "But", "Is",
    "Are", "Was", "Were", "Has", "Have", "Had", "Will", "Would", "Be", "Been", "By", "To", "Of",
    "For", "From", "With", "As", "After", "Before", "During",
];

const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

/// Generic head nouns dropped from the end of a multi-token mention.
const MENTION_SUFFIX_STRIP: &[&str] = &["API"];

fn is_year(word: &str) -> bool {
    word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) && {
        let y: i32 = word.parse().unwrap_or(0);
        (1000..3000).contains(&y)
    }
}

fn is_version_tag(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next() == Some('v')
        && word.len() > 1
        && word[1..].chars().all(|c| c.is_ascii_digit() || c == '.')
        && word[1..].chars().any(|c| c.is_ascii_digit())
}

fn is_month(word: &str) -> bool {
    MONTHS.contains(&word)
}

/// One parsed unit of a statement.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    /// Entity-like mention with its byte offset within the statement.
    Mention { text: String, offset: usize },
    /// Any other word, lowercased.
    Word { text: String },
    /// A temporal reference.
    Time(TimeRef),
}

struct RawToken {
    text: String,
    offset: usize,
}

fn tokenize(statement: &str) -> Vec<RawToken> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in statement.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push((s, statement.len()));
    }
    tokens
        .into_iter()
        .filter_map(|(s, e)| {
            let raw = &statement[s..e];
            let trimmed = raw.trim_matches(|c: char| ".,;:!?()\"'".contains(c));
            if trimmed.is_empty() {
                None
            } else {
                let lead = raw.find(trimmed).unwrap_or(0);
                Some(RawToken { text: trimmed.to_string(), offset: s + lead })
            }
        })
        .collect()
}

fn is_mention_start(token: &str) -> bool {
    let Some(first) = token.chars().next() else { return false };
    first.is_ascii_uppercase()
        && !CAP_STOPWORDS.contains(&token)
        && !is_month(token)
        && !is_year(token)
}

/// A digits-only token continues a mention ("Windows 10 EOL") unless it is
/// a plausible year.
fn continues_mention(token: &str) -> bool {
    is_mention_start(token)
        || (!is_year(token) && !token.is_empty() && token.chars().all(|c| c.is_ascii_digit()))
}

/// Parse a statement into mention / word / time items.
pub fn items(statement: &str) -> Vec<Item> {
    let tokens = tokenize(statement);
    let mut items = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];

        // Month D, YYYY  (day optional)
        if is_month(&tok.text) {
            let mut j = i + 1;
            if j < tokens.len() && tokens[j].text.chars().all(|c| c.is_ascii_digit()) && !is_year(&tokens[j].text) {
                j += 1;
            }
            if j < tokens.len() && is_year(&tokens[j].text) {
                let year: i32 = tokens[j].text.parse().unwrap();
                items.push(Item::Time(TimeRef::year(year)));
                i = j + 1;
                continue;
            }
        }
        if is_year(&tok.text) {
            items.push(Item::Time(TimeRef::year(tok.text.parse().unwrap())));
            i += 1;
            continue;
        }
        if is_version_tag(&tok.text) {
            items.push(Item::Time(TimeRef::version(tok.text.clone())));
            i += 1;
            continue;
        }

        // Articles never participate in any pattern. "A"/"An" double as
        // mention tokens ("A acquires B"), so they drop only when a
        // mention follows.
        if tok.text == "The" || tok.text == "the" {
            i += 1;
            continue;
        }
        if (tok.text == "A" || tok.text == "An")
            && tokens.get(i + 1).is_some_and(|t| is_mention_start(&t.text))
        {
            i += 1;
            continue;
        }

        if is_mention_start(&tok.text) {
            let offset = tok.offset;
            let mut parts = vec![tok.text.clone()];
            let mut j = i + 1;
            while j < tokens.len() && continues_mention(&tokens[j].text) {
                parts.push(tokens[j].text.clone());
                j += 1;
            }
            while parts.len() > 1
                && MENTION_SUFFIX_STRIP.contains(&parts.last().unwrap().as_str())
            {
                parts.pop();
            }
            items.push(Item::Mention { text: parts.join(" "), offset });
            i = j;
            continue;
        }

        items.push(Item::Word { text: tok.text.to_ascii_lowercase() });
        i += 1;
    }
    items
}

/// Distinct mention surface forms in a statement.
pub fn mention_count(statement: &str) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for item in items(statement) {
        if let Item::Mention { text, .. } = item {
            seen.insert(text);
        }
    }
    seen.len()
}

/// True when the statement carries any temporal reference.
pub fn has_temporal_marker(statement: &str) -> bool {
    items(statement).iter().any(|i| matches!(i, Item::Time(_)))
}

/// True when the statement contains any state-transition / trigger verb
/// form.
pub fn has_event_verb(statement: &str) -> bool {
    items(statement).iter().any(|i| match i {
        Item::Word { text } => verb_for_form(text).is_some(),
        _ => false,
    })
}

/// A parsed proposition.
#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Triple {
        head: (String, usize),
        relation: String,
        /// `(text, Some(offset))` for a mention tail, `(text, None)` for a
        /// literal.
        tail: (String, Option<usize>),
    },
    Event {
        trigger_surface: String,
        trigger_lemma: String,
        /// (role, mention text, mention offset)
        roles: Vec<(String, String, usize)>,
        time: Option<TimeRef>,
    },
}

const COPULAS: &[&str] = &["is", "was", "are", "were"];
const RESERVED_WORDS: &[&str] = &[
    "is", "was", "are", "were", "has", "have", "had", "will", "would", "be", "been", "also", "a",
    "an", "the", "and", "or", "in", "on", "by", "to", "of",
];

/// Leading "In/On/During <time>," adjunct: bind the time and skip past it.
fn split_time_adjunct(items: &[Item]) -> (Option<TimeRef>, usize) {
    let mut skip = 0usize;
    if let Some(Item::Word { text }) = items.first() {
        if text == "in" || text == "on" || text == "during" {
            skip = 1;
        }
    }
    if let Some(Item::Time(t)) = items.get(skip) {
        (Some(t.clone()), skip + 1)
    } else {
        (None, 0)
    }
}

fn trailing_time(items: &[Item]) -> Option<TimeRef> {
    items.iter().find_map(|i| match i {
        Item::Time(t) => Some(t.clone()),
        _ => None,
    })
}

/// Event patterns: active `<M> <verb> <M>` and passive `<M> is <participle>`.
pub fn parse_event(statement: &str) -> Option<Parsed> {
    let all = items(statement);
    let (lead_time, skip) = split_time_adjunct(&all);
    let rest = &all[skip..];

    let Some(Item::Mention { text: subject, offset: subject_off }) = rest.first() else {
        return None;
    };

    match rest.get(1) {
        // Active voice: <M> <verb-form> <M> ...
        Some(Item::Word { text }) if verb_for_form(text).is_some() => {
            let verb = verb_for_form(text).unwrap();
            let Some(Item::Mention { text: object, offset: object_off }) = rest.get(2) else {
                return None;
            };
            let time = lead_time.or_else(|| trailing_time(&rest[3..]));
            Some(Parsed::Event {
                trigger_surface: text.clone(),
                trigger_lemma: verb.lemma.to_string(),
                roles: vec![
                    (verb.actor_role.to_string(), subject.clone(), *subject_off),
                    (verb.undergoer_role.to_string(), object.clone(), *object_off),
                ],
                time,
            })
        }
        // Passive voice: <M> is|was [been] <participle> [in <time>] [by <M>]
        Some(Item::Word { text }) if COPULAS.contains(&text.as_str()) || text == "has" || text == "have" => {
            let mut idx = 2;
            if let Some(Item::Word { text }) = rest.get(idx) {
                if text == "been" {
                    idx += 1;
                }
            }
            let Some(Item::Word { text: verb_word }) = rest.get(idx) else {
                return None;
            };
            let verb = verb_for_form(verb_word)?;
            if verb.participle != verb_word.as_str() {
                return None;
            }
            let tail = &rest[idx + 1..];
            let time = lead_time.or_else(|| trailing_time_before_clause(tail));
            let mut roles = vec![(verb.undergoer_role.to_string(), subject.clone(), *subject_off)];
            if let Some(actor) = by_phrase(tail) {
                roles.push((verb.actor_role.to_string(), actor.0, actor.1));
            }
            Some(Parsed::Event {
                trigger_surface: verb_word.clone(),
                trigger_lemma: verb.lemma.to_string(),
                roles,
                time,
            })
        }
        _ => None,
    }
}

/// First time reference before any coordinating clause ("and ..."), so the
/// primary clause keeps its own timestamp.
fn trailing_time_before_clause(items: &[Item]) -> Option<TimeRef> {
    for item in items {
        match item {
            Item::Word { text } if text == "and" => return None,
            Item::Time(t) => return Some(t.clone()),
            _ => {}
        }
    }
    None
}

fn by_phrase(items: &[Item]) -> Option<(String, usize)> {
    let mut iter = items.iter().peekable();
    while let Some(item) = iter.next() {
        if let Item::Word { text } = item {
            if text == "and" {
                return None;
            }
            if text == "by" {
                if let Some(Item::Mention { text, offset }) = iter.peek() {
                    return Some((text.clone(), *offset));
                }
            }
        }
    }
    None
}

/// Triple patterns, including the degraded event fallbacks used when the
/// event track is disabled.
pub fn parse_triple(statement: &str) -> Option<Parsed> {
    let all = items(statement);
    let (_, skip) = split_time_adjunct(&all);
    let rest = &all[skip..];

    let Some(Item::Mention { text: head, offset: head_off }) = rest.first() else {
        return None;
    };
    let head = (head.clone(), *head_off);

    // <M> is also known as <M>
    if matches_words(rest, 1, &["is", "also", "known", "as"]) {
        if let Some(Item::Mention { text, .. }) = rest.get(5) {
            return Some(Parsed::Triple {
                head,
                relation: "also_known_as".into(),
                tail: (text.clone(), None),
            });
        }
    }

    // <M> is a|an <words...>
    if let Some(Item::Word { text }) = rest.get(1) {
        if COPULAS.contains(&text.as_str()) {
            if let Some(Item::Word { text: art }) = rest.get(2) {
                if art == "a" || art == "an" {
                    let tail_items = &rest[3..];
                    if let [Item::Mention { text, offset }] = tail_items {
                        return Some(Parsed::Triple {
                            head,
                            relation: "is_a".into(),
                            tail: (text.clone(), Some(*offset)),
                        });
                    }
                    let words: Vec<&str> = tail_items
                        .iter()
                        .filter_map(|i| match i {
                            Item::Word { text } => Some(text.as_str()),
                            _ => None,
                        })
                        .collect();
                    if !words.is_empty() {
                        return Some(Parsed::Triple {
                            head,
                            relation: "is_a".into(),
                            tail: (words.join(" "), None),
                        });
                    }
                }
            }
        }
    }

    // Degraded event forms: keep the proposition, drop time and roles.
    if let Some(Parsed::Event { trigger_lemma, roles, .. }) = parse_event(statement) {
        let verb = verb_for_lemma(&trigger_lemma).expect("lemma from table");
        let undergoer = roles.iter().find(|(r, _, _)| r == verb.undergoer_role);
        let actor = roles.iter().find(|(r, _, _)| r == verb.actor_role);
        return match (actor, undergoer) {
            (Some(a), Some(u)) => Some(Parsed::Triple {
                head: (a.1.clone(), a.2),
                relation: trigger_lemma.clone(),
                tail: (u.1.clone(), Some(u.2)),
            }),
            (None, Some(u)) => Some(Parsed::Triple {
                head: (u.1.clone(), u.2),
                relation: "status".into(),
                tail: (verb.participle.to_string(), None),
            }),
            _ => None,
        };
    }

    // <M> has <attr> <value>
    if let Some(Item::Word { text }) = rest.get(1) {
        if text == "has" {
            if let Some(Item::Word { text: attr }) = rest.get(2) {
                return match rest.get(3) {
                    Some(Item::Mention { text, offset }) => Some(Parsed::Triple {
                        head,
                        relation: attr.clone(),
                        tail: (text.clone(), Some(*offset)),
                    }),
                    Some(Item::Word { text }) => Some(Parsed::Triple {
                        head,
                        relation: attr.clone(),
                        tail: (text.clone(), None),
                    }),
                    _ => None,
                };
            }
        }
    }

    // <M> <relation_word> <M|word>
    if let Some(Item::Word { text: rel }) = rest.get(1) {
        if !RESERVED_WORDS.contains(&rel.as_str())
            && verb_for_form(rel).is_none()
            && rel.chars().all(|c| c.is_ascii_lowercase() || c == '_')
        {
            return match rest.get(2) {
                Some(Item::Mention { text, offset }) => Some(Parsed::Triple {
                    head,
                    relation: rel.clone(),
                    tail: (text.clone(), Some(*offset)),
                }),
                Some(Item::Word { text }) => Some(Parsed::Triple {
                    head,
                    relation: rel.clone(),
                    tail: (text.clone(), None),
                }),
                _ => None,
            };
        }
    }

    None
}

fn matches_words(items: &[Item], from: usize, words: &[&str]) -> bool {
    words.iter().enumerate().all(|(i, w)| {
        matches!(items.get(from + i), Some(Item::Word { text }) if text == w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mentions_merge_and_strip_api_suffix() {
        let its = items("The PodSecurityPolicy API is deprecated in v1.21 and will be removed in v1.25.");
        assert_eq!(
            its.iter()
                .filter_map(|i| match i {
                    Item::Mention { text, .. } => Some(text.as_str()),
                    _ => None,
                })
                .collect::<Vec<_>>(),
            vec!["PodSecurityPolicy"]
        );
        assert!(its.contains(&Item::Time(TimeRef::version("v1.21"))));
    }

    #[test]
    fn multiword_mention_with_number() {
        assert_eq!(mention_count("In 2022, Microsoft announced Windows 10 EOL."), 2);
        let its = items("In 2022, Microsoft announced Windows 10 EOL.");
        assert!(its.iter().any(
            |i| matches!(i, Item::Mention { text, .. } if text == "Windows 10 EOL")
        ));
    }

    #[test]
    fn case_doc_parses_to_single_deprecation_event() {
        let parsed = parse_event(
            "The PodSecurityPolicy API is deprecated in v1.21 and will be removed in v1.25.",
        )
        .unwrap();
        match parsed {
            Parsed::Event { trigger_surface, trigger_lemma, roles, time } => {
                assert_eq!(trigger_surface, "deprecated");
                assert_eq!(trigger_lemma, "deprecate");
                assert_eq!(roles.len(), 1);
                assert_eq!(roles[0].0, "subject");
                assert_eq!(roles[0].1, "PodSecurityPolicy");
                assert_eq!(time, Some(TimeRef::version("v1.21")));
            }
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn active_acquisition_event() {
        let parsed = parse_event("A acquires B in 2021.").unwrap();
        match parsed {
            Parsed::Event { trigger_lemma, roles, time, .. } => {
                assert_eq!(trigger_lemma, "acquire");
                assert_eq!(
                    roles.iter().map(|(r, m, _)| (r.as_str(), m.as_str())).collect::<Vec<_>>(),
                    vec![("acquirer", "A"), ("acquired", "B")]
                );
                assert_eq!(time, Some(TimeRef::year(2021)));
            }
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn leading_time_adjunct() {
        let parsed = parse_event("In 2016, Kubernetes released PodSecurityPolicy.").unwrap();
        match parsed {
            Parsed::Event { trigger_lemma, time, roles, .. } => {
                assert_eq!(trigger_lemma, "release");
                assert_eq!(time, Some(TimeRef::year(2016)));
                assert_eq!(roles[0].1, "Kubernetes");
                assert_eq!(roles[1].1, "PodSecurityPolicy");
            }
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn passive_with_by_phrase() {
        let parsed = parse_event("PodSecurityPolicy was replaced in 2021 by PodSecurityAdmission.").unwrap();
        match parsed {
            Parsed::Event { trigger_lemma, roles, .. } => {
                assert_eq!(trigger_lemma, "replace");
                assert_eq!(
                    roles.iter().map(|(r, m, _)| (r.as_str(), m.as_str())).collect::<Vec<_>>(),
                    vec![("subject", "PodSecurityPolicy"), ("replacement", "PodSecurityAdmission")]
                );
            }
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn founded_event_with_date() {
        let parsed =
            parse_event("Google Inc was founded on September 4, 1998, in Menlo Park.").unwrap();
        match parsed {
            Parsed::Event { trigger_lemma, roles, time, .. } => {
                assert_eq!(trigger_lemma, "found");
                assert_eq!(roles[0].1, "Google Inc");
                assert_eq!(time, Some(TimeRef::year(1998)));
            }
            other => panic!("expected event, got {other:?}"),
        }
    }

    #[test]
    fn triple_patterns() {
        assert_eq!(
            parse_triple("A is_a Library."),
            Some(Parsed::Triple {
                head: ("A".into(), 0),
                relation: "is_a".into(),
                tail: ("Library".into(), Some(7)),
            })
        );
        assert_eq!(
            parse_triple("PodSecurityPolicy has status active."),
            Some(Parsed::Triple {
                head: ("PodSecurityPolicy".into(), 0),
                relation: "status".into(),
                tail: ("active".into(), None),
            })
        );
        assert_eq!(
            parse_triple("Python is a programming language."),
            Some(Parsed::Triple {
                head: ("Python".into(), 0),
                relation: "is_a".into(),
                tail: ("programming language".into(), None),
            })
        );
        assert_eq!(
            parse_triple("Kubernetes is also known as K8s."),
            Some(Parsed::Triple {
                head: ("Kubernetes".into(), 0),
                relation: "also_known_as".into(),
                tail: ("K8s".into(), None),
            })
        );
    }

    #[test]
    fn degraded_event_fallbacks() {
        assert_eq!(
            parse_triple("Acme acquires Initech in 2019."),
            Some(Parsed::Triple {
                head: ("Acme".into(), 0),
                relation: "acquire".into(),
                tail: ("Initech".into(), Some(14)),
            })
        );
        assert_eq!(
            parse_triple("The PodSecurityPolicy API is deprecated in v1.21."),
            Some(Parsed::Triple {
                head: ("PodSecurityPolicy".into(), 4),
                relation: "status".into(),
                tail: ("deprecated".into(), None),
            })
        );
    }

    #[test]
    fn router_helpers() {
        assert!(!has_temporal_marker("Python is a programming language."));
        assert!(has_temporal_marker("In 2022, Microsoft announced Windows 10 EOL."));
        assert!(has_event_verb("PodSecurityAdmission replaces PodSecurityPolicy."));
        assert!(!has_event_verb("Kubernetes has vendor CNCF."));
        assert_eq!(mention_count("Alpha part_of Beta."), 2);
    }
}
