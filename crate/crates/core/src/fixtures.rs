//! Bundled fixture data: the family/geography rule set and a synthetic world
//! knowledge base consistent with it.
//!
//! The world is produced by [`generate_world`] and checked in under `data/`
//! so it can be inspected and diffed; a test keeps the two in sync. Run
//! `cargo run -p ruleke-core --example make_world` after changing the
//! generator.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{AliasTable, EntityId, Fact, KnowledgeBase};
use crate::rules::RuleSet;

const BUILTIN_RULES: &str = include_str!("../data/builtin_rules.txt");
const WORLD_TRIPLES: &str = include_str!("../data/world_kb.tsv");
const WORLD_ALIASES: &str = include_str!("../data/world_aliases.tsv");

pub const WORLD_SEED: u64 = 0;

/// The 17 family and geography rules, each with support 1.
pub fn builtin_rules() -> RuleSet {
    RuleSet::from_reader(BUILTIN_RULES.as_bytes(), Path::new("<builtin rules>")).expect("bundled rules parse")
}

/// The checked-in world knowledge base with its aliases.
pub fn world() -> KnowledgeBase {
    let aliases = AliasTable::from_reader(WORLD_ALIASES.as_bytes(), Path::new("<world aliases>")).expect("bundled aliases parse");
    KnowledgeBase::from_reader(WORLD_TRIPLES.as_bytes(), Path::new("<world kb>"), aliases).expect("bundled world parses")
}

pub fn world_triples_text() -> &'static str {
    WORLD_TRIPLES
}

pub fn world_aliases_text() -> &'static str {
    WORLD_ALIASES
}

struct Country {
    name: &'static str,
    continent: &'static str,
    language: &'static str,
    cities: &'static [&'static str],
    university: &'static str,
    parties: &'static [&'static str],
    surnames: &'static [&'static str],
}

const COUNTRIES: &[Country] = &[
    Country {
        name: "America",
        continent: "North America",
        language: "English",
        cities: &["Washington", "New York", "Chicago"],
        university: "Harvard University",
        parties: &["Democratic Party", "Republican Party"],
        surnames: &["Miller", "Walker", "Carter", "Hughes", "Porter", "Reed"],
    },
    Country {
        name: "Canada",
        continent: "North America",
        language: "English",
        cities: &["Ottawa", "Toronto", "Vancouver"],
        university: "University of Toronto",
        parties: &["Liberal Party of Canada"],
        surnames: &["Tremblay", "Gagnon", "Roy", "Campbell", "Stewart", "Fraser"],
    },
    Country {
        name: "Germany",
        continent: "Europe",
        language: "German",
        cities: &["Berlin", "Munich", "Ulm"],
        university: "Heidelberg University",
        parties: &["Social Democratic Party", "Christian Democratic Union"],
        surnames: &["Becker", "Schmidt", "Fischer", "Weber", "Wagner", "Hoffmann"],
    },
    Country {
        name: "France",
        continent: "Europe",
        language: "French",
        cities: &["Paris", "Lyon", "Marseille"],
        university: "Sorbonne University",
        parties: &["Renaissance"],
        surnames: &["Martin", "Bernard", "Dubois", "Moreau", "Laurent", "Girard"],
    },
    Country {
        name: "Italy",
        continent: "Europe",
        language: "Italian",
        cities: &["Rome", "Milan"],
        university: "University of Bologna",
        parties: &["Brothers of Italy"],
        surnames: &["Rossi", "Russo", "Ferrari", "Esposito", "Bianchi", "Romano"],
    },
    Country {
        name: "Spain",
        continent: "Europe",
        language: "Spanish",
        cities: &["Madrid", "Barcelona"],
        university: "University of Salamanca",
        parties: &["Spanish Socialist Workers Party"],
        surnames: &["Garcia", "Fernandez", "Lopez", "Sanchez", "Navarro", "Ortega"],
    },
    Country {
        name: "Japan",
        continent: "Asia",
        language: "Japanese",
        cities: &["Tokyo", "Osaka", "Kyoto"],
        university: "University of Tokyo",
        parties: &["Liberal Democratic Party"],
        surnames: &["Sato", "Suzuki", "Takahashi", "Tanaka", "Watanabe", "Ito"],
    },
    Country {
        name: "China",
        continent: "Asia",
        language: "Chinese",
        cities: &["Beijing", "Shanghai"],
        university: "Peking University",
        parties: &["Communist Party of China"],
        surnames: &["Wang", "Li", "Zhang", "Liu", "Chen", "Yang"],
    },
    Country {
        name: "India",
        continent: "Asia",
        language: "Hindi",
        cities: &["New Delhi", "Mumbai", "Chennai"],
        university: "University of Delhi",
        parties: &["Indian National Congress", "Bharatiya Janata Party"],
        surnames: &["Sharma", "Patel", "Singh", "Gupta", "Iyer", "Reddy"],
    },
    Country {
        name: "Brazil",
        continent: "South America",
        language: "Portuguese",
        cities: &["Brasilia", "Rio de Janeiro", "Sao Paulo"],
        university: "University of Sao Paulo",
        parties: &["Workers Party"],
        surnames: &["Silva", "Santos", "Oliveira", "Souza", "Costa", "Pereira"],
    },
    Country {
        name: "Argentina",
        continent: "South America",
        language: "Spanish",
        cities: &["Buenos Aires", "Cordoba"],
        university: "University of Buenos Aires",
        parties: &["Justicialist Party"],
        surnames: &["Gonzalez", "Rodriguez", "Gomez", "Diaz", "Alvarez", "Romero"],
    },
    Country {
        name: "Nigeria",
        continent: "Africa",
        language: "English",
        cities: &["Abuja", "Lagos"],
        university: "University of Lagos",
        parties: &["All Progressives Congress"],
        surnames: &["Okafor", "Adeyemi", "Bello", "Eze", "Okonkwo", "Balogun"],
    },
    Country {
        name: "Egypt",
        continent: "Africa",
        language: "Arabic",
        cities: &["Cairo", "Alexandria"],
        university: "Cairo University",
        parties: &["Nation's Future Party"],
        surnames: &["Hassan", "Mahmoud", "Ibrahim", "Mostafa", "Nasser", "Farouk"],
    },
];

const MALE: &[&str] = &[
    "James", "John", "Robert", "Michael", "William", "David", "Richard", "Joseph", "Thomas", "Charles", "Daniel", "Matthew",
    "Anthony", "Mark", "Paul", "Steven", "Andrew", "Kenneth", "George", "Edward", "Henry", "Peter", "Samuel", "Frank", "Victor",
    "Hugo", "Leon", "Oscar", "Felix", "Arthur",
];

const FEMALE: &[&str] = &[
    "Mary",
    "Patricia",
    "Jennifer",
    "Linda",
    "Elizabeth",
    "Barbara",
    "Susan",
    "Jessica",
    "Sarah",
    "Karen",
    "Nancy",
    "Lisa",
    "Margaret",
    "Sandra",
    "Ashley",
    "Emily",
    "Donna",
    "Michelle",
    "Carol",
    "Amanda",
    "Helen",
    "Laura",
    "Anna",
    "Clara",
    "Sophie",
    "Julia",
    "Irene",
    "Rosa",
    "Marta",
    "Lucia",
];

const RELIGIONS: &[&str] = &["Christianity", "Islam", "Hinduism", "Buddhism", "Judaism"];

const OCCUPATIONS: &[&str] = &[
    "physicist",
    "teacher",
    "engineer",
    "lawyer",
    "physician",
    "farmer",
    "writer",
    "politician",
    "nurse",
    "architect",
];

#[derive(Clone)]
struct Person {
    name: String,
    male: bool,
    surname: String,
    country: usize,
}

struct Builder {
    rng: ChaCha8Rng,
    facts: BTreeSet<Fact>,
    names: HashSet<String>,
}

impl Builder {
    fn add(&mut self, s: &str, r: &str, o: &str) {
        self.facts.insert(Fact::new(r, s, o));
    }

    fn named(&mut self, name: &str, male: bool, surname: &str, country: usize) -> Person {
        assert!(self.names.insert(name.to_string()), "duplicate name {name}");
        Person {
            name: name.to_string(),
            male,
            surname: surname.to_string(),
            country,
        }
    }

    fn person(&mut self, country: usize, male: bool, surname: Option<&str>) -> Person {
        loop {
            let first = if male { MALE } else { FEMALE }.choose(&mut self.rng).expect("names");
            let last = match surname {
                Some(s) => s,
                None => COUNTRIES[country].surnames.choose(&mut self.rng).expect("surnames"),
            };
            let full = format!("{first} {last}");
            if !self.names.contains(&full) {
                return self.named(&full, male, last, country);
            }
        }
    }

    fn city(&mut self, country: usize) -> &'static str {
        COUNTRIES[country].cities.choose(&mut self.rng).expect("cities")
    }

    /// Places, occupation, faith, schooling and party for one person.
    fn profile(&mut self, p: &Person, elder: bool) {
        let c = &COUNTRIES[p.country];
        let born = self.city(p.country);
        self.add(&p.name, "born_in_the_place", born);
        let home_country = if self.rng.gen_bool(0.15) {
            self.rng.gen_range(0..COUNTRIES.len())
        } else {
            p.country
        };
        let home = self.city(home_country);
        self.add(&p.name, "live_in_the_place", home);
        let work = self.city(home_country);
        self.add(&p.name, "workplace_is_at", work);
        let job = *OCCUPATIONS.choose(&mut self.rng).expect("jobs");
        self.add(&p.name, "occupation_is", job);
        let faith = *RELIGIONS.choose(&mut self.rng).expect("faiths");
        self.add(&p.name, "affiliated_with_the_religion", faith);
        if self.rng.gen_bool(0.6) {
            let uni_country = if self.rng.gen_bool(0.2) {
                self.rng.gen_range(0..COUNTRIES.len())
            } else {
                p.country
            };
            self.add(&p.name, "educated_at_the_university", COUNTRIES[uni_country].university);
        }
        if self.rng.gen_bool(0.4) {
            let party = *c.parties.choose(&mut self.rng).expect("parties");
            self.add(&p.name, "party_membership_is", party);
        }
        if elder {
            let died = self.city(p.country);
            self.add(&p.name, "died_in_the_place", died);
        }
    }

    fn marry(&mut self, husband: &Person, wife: &Person) {
        self.add(&husband.name, "wife_is", &wife.name);
        self.add(&wife.name, "husband_is", &husband.name);
        self.add(&husband.name, "spouse_is", &wife.name);
        self.add(&wife.name, "spouse_is", &husband.name);
    }

    fn children(&mut self, father: &Person, mother: &Person, kids: &[Person]) {
        for k in kids {
            self.add(&k.name, "father_is", &father.name);
            self.add(&k.name, "mother_is", &mother.name);
            let parent = if self.rng.gen_bool(0.5) { father } else { mother };
            self.add(&k.name, "parent_is", &parent.name);
            let child_rel = if k.male { "son_is" } else { "daughter_is" };
            self.add(&father.name, child_rel, &k.name);
            self.add(&mother.name, child_rel, &k.name);
            for other in kids.iter().filter(|o| o.name != k.name) {
                self.add(&k.name, "sibling_is", &other.name);
                let rel = if other.male { "brother_is" } else { "sister_is" };
                self.add(&k.name, rel, &other.name);
            }
        }
    }

    fn couple(&mut self, country: usize) -> (Person, Person) {
        let h = self.person(country, true, None);
        let w = self.person(country, false, None);
        self.marry(&h, &w);
        (h, w)
    }

    /// Three generations: founders, their children with spouses (whose own
    /// parents appear half the time), and grandchildren.
    fn family(&mut self, country: usize) {
        let (g1, g2) = self.couple(country);
        self.profile(&g1, true);
        self.profile(&g2, true);
        let n_kids = self.rng.gen_range(2..=3);
        let kids: Vec<Person> = (0..n_kids)
            .map(|_| {
                let male = self.rng.gen_bool(0.5);
                let surname = g1.surname.clone();
                self.person(country, male, Some(&surname))
            })
            .collect();
        self.children(&g1, &g2, &kids);
        for kid in &kids {
            self.profile(kid, false);
            let spouse = self.person(country, !kid.male, None);
            self.profile(&spouse, false);
            if self.rng.gen_bool(0.5) {
                let (sf, sm) = self.couple(country);
                self.profile(&sf, true);
                self.profile(&sm, true);
                self.children(&sf, &sm, std::slice::from_ref(&spouse));
            }
            let (husband, wife) = if kid.male { (kid, &spouse) } else { (&spouse, kid) };
            self.marry(husband, wife);
            let n = self.rng.gen_range(1..=3);
            let grandkids: Vec<Person> = (0..n)
                .map(|_| {
                    let male = self.rng.gen_bool(0.5);
                    let surname = husband.surname.clone();
                    self.person(country, male, Some(&surname))
                })
                .collect();
            let (husband, wife) = (husband.clone(), wife.clone());
            self.children(&husband, &wife, &grandkids);
            for g in &grandkids {
                self.profile(g, false);
            }
        }
    }

    /// Head of state, spouse and the spouse's parents.
    fn leadership(&mut self, country: usize, names: Option<[&str; 4]>) {
        let (h, w, wf, wm) = match names {
            Some([h, w, wf, wm]) => {
                let h = self.named(h, true, last_word(h), country);
                let w = self.named(w, false, last_word(w), country);
                let wf = self.named(wf, true, last_word(wf), country);
                let wm = self.named(wm, false, last_word(wm), country);
                (h, w, wf, wm)
            }
            None => {
                let h = self.person(country, true, None);
                let w = self.person(country, false, None);
                let wf = self.person(country, true, Some(&w.surname.clone()));
                let wm = self.person(country, false, None);
                (h, w, wf, wm)
            }
        };
        self.add(COUNTRIES[country].name, "head_of_state_is", &h.name);
        self.marry(&h, &w);
        self.marry(&wf, &wm);
        self.children(&wf, &wm, std::slice::from_ref(&w));
        for p in [&h, &w] {
            self.profile(p, false);
        }
        for p in [&wf, &wm] {
            self.profile(p, true);
        }
    }
}

fn last_word(name: &str) -> &str {
    name.rsplit(' ').next().unwrap_or(name)
}

fn country_index(name: &str) -> usize {
    COUNTRIES.iter().position(|c| c.name == name).expect("known country")
}

/// Builds the synthetic world: 13 countries with cities, languages, parties
/// and leaders, a few three-generation families per country, and the
/// Einstein household. The result is closed under [`builtin_rules`].
pub fn generate_world(seed: u64) -> KnowledgeBase {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        facts: BTreeSet::new(),
        names: HashSet::new(),
    };
    for c in COUNTRIES {
        b.add(c.name, "located_in_the_continent", c.continent);
        b.add(c.name, "official_language_is", c.language);
        b.add(c.name, "capital_is", c.cities[0]);
        for city in c.cities {
            b.add(city, "located_in_the_country", c.name);
        }
        b.add(c.university, "located_in_the_country", c.name);
        for party in c.parties {
            b.add(party, "is_a_political_party", c.name);
        }
    }

    let america = country_index("America");
    let germany = country_index("Germany");
    b.leadership(america, Some(["Joe Biden", "Jill Biden", "Donald Jacobs", "Bonny Jacobs"]));
    for i in (0..COUNTRIES.len()).filter(|&i| i != america) {
        b.leadership(i, None);
    }

    let albert = b.named("Albert Einstein", true, "Einstein", germany);
    let elsa = b.named("Elsa Einstein", false, "Einstein", germany);
    let rudolf = b.named("Rudolf Einstein", true, "Einstein", germany);
    let fanny = b.named("Fanny Einstein", false, "Einstein", germany);
    let hermann = b.named("Hermann Einstein", true, "Einstein", germany);
    let pauline = b.named("Pauline Koch", false, "Koch", germany);
    b.marry(&albert, &elsa);
    b.marry(&rudolf, &fanny);
    b.marry(&hermann, &pauline);
    b.children(&rudolf, &fanny, std::slice::from_ref(&elsa));
    b.children(&hermann, &pauline, std::slice::from_ref(&albert));
    for p in [&albert, &elsa] {
        b.profile(p, true);
    }
    for p in [&rudolf, &fanny, &hermann, &pauline] {
        b.profile(p, true);
    }

    for i in 0..COUNTRIES.len() {
        b.family(i);
    }

    let mut aliases = AliasTable::new();
    for (canonical, names) in [
        ("America", &["United States", "USA", "United States of America"][..]),
        ("Germany", &["Deutschland"][..]),
        ("Japan", &["Nippon"][..]),
        ("New York", &["NYC", "New York City"][..]),
        ("Albert Einstein", &["Einstein"][..]),
        ("Joe Biden", &["Biden", "Joseph Biden"][..]),
        ("Rio de Janeiro", &["Rio"][..]),
        ("Communist Party of China", &["CPC"][..]),
    ] {
        for n in names {
            aliases
                .insert(&EntityId::from(canonical), n)
                .expect("fixture aliases are disjoint");
        }
    }
    KnowledgeBase::from_facts(b.facts, aliases).materialize(&builtin_rules(), 16)
}

/// Serializes a world as `(triples, aliases)` text in the bundled format.
pub fn render_world(kb: &KnowledgeBase) -> (String, String) {
    let mut triples = Vec::new();
    kb.write_triples(&mut triples).expect("in-memory write");
    let mut aliases = Vec::new();
    kb.aliases().write_to(&mut aliases).expect("in-memory write");
    (
        String::from_utf8(triples).expect("utf-8"),
        String::from_utf8(aliases).expect("utf-8"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::rule_confidence;

    #[test]
    fn bundled_world_matches_generator() {
        let (triples, aliases) = render_world(&generate_world(WORLD_SEED));
        assert!(
            triples == WORLD_TRIPLES,
            "data/world_kb.tsv is stale; run the make_world example"
        );
        assert!(
            aliases == WORLD_ALIASES,
            "data/world_aliases.tsv is stale; run the make_world example"
        );
    }

    #[test]
    fn world_size_and_closure() {
        let kb = world();
        let n = kb.entities().len();
        assert!((250..=450).contains(&n), "{n} entities");
        let rules = builtin_rules();
        assert_eq!(rules.len(), 17);
        assert_eq!(kb.materialize(&rules, 4).len(), kb.len());
        for r in &rules {
            assert_eq!(rule_confidence(&kb, r), Ok(1.0), "{r}");
        }
    }

    #[test]
    fn seeded_example_facts() {
        let kb = world();
        let one = |s: &str, r: &str| kb.lookup_objects(&s.into(), &r.into()).into_iter().collect::<Vec<_>>();
        assert_eq!(one("America", "head_of_state_is"), vec!["Joe Biden".into()]);
        assert_eq!(one("America", "the_First_Lady_is"), vec!["Jill Biden".into()]);
        assert_eq!(one("Albert Einstein", "wife_is"), vec!["Elsa Einstein".into()]);
        assert_eq!(one("Elsa Einstein", "father_is"), vec!["Rudolf Einstein".into()]);
        assert!(kb.alias_expand(&"America".into()).contains("USA"));
    }
}
