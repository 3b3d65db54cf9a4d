//! Hand-crafted graphic, orthographic and lexical line features.
//!
//! Every feature lies in `[0, 1]`: counts are divided by a cap and clipped,
//! fractions are taken over the line's character count (0 for empty lines).

pub const FEATURE_DIM: usize = 16;

pub const QUOTE_DEPTH_CAP: usize = 5;
pub const LEADING_WS_CAP: usize = 16;
pub const LENGTH_CAP: usize = 200;
pub const TAB_CAP: usize = 8;

/// Position of each feature in the vector.
pub mod index {
    pub const QUOTE_DEPTH: usize = 0;
    pub const IS_EMPTY: usize = 1;
    pub const SIG_DELIMITER: usize = 2;
    pub const SEPARATOR: usize = 3;
    pub const LEADING_WS: usize = 4;
    pub const LENGTH: usize = 5;
    pub const DIGIT_FRAC: usize = 6;
    pub const PUNCT_FRAC: usize = 7;
    pub const UPPER_FRAC: usize = 8;
    pub const HAS_AT: usize = 9;
    pub const HAS_URL: usize = 10;
    pub const ENDS_WITH_COLON: usize = 11;
    pub const GREETING: usize = 12;
    pub const CLOSING: usize = 13;
    pub const CODE_FRAC: usize = 14;
    pub const TABS: usize = 15;
}

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "quote_depth",
    "is_empty",
    "sig_delimiter",
    "separator",
    "leading_whitespace",
    "length",
    "digit_fraction",
    "punctuation_fraction",
    "uppercase_fraction",
    "has_at",
    "has_url",
    "ends_with_colon",
    "greeting",
    "closing",
    "code_symbol_fraction",
    "tabs",
];

const GREETINGS: &[&str] = &[
    "hi", "hello", "hey", "dear", "greetings", "good morning", "good afternoon", "good evening",
    "olá", "ola", "oi", "prezado", "prezada", "prezados", "caro", "cara", "caros", "bom dia",
    "boa tarde", "boa noite", "hola", "estimado", "estimada", "estimados", "querido", "querida",
    "buenos días", "buenos dias", "buenas tardes", "buenas noches", "buenas", "bonjour", "bonsoir",
    "salut", "cher", "chère", "chers", "coucou", "hallo", "ciao",
];

const CLOSINGS: &[&str] = &[
    "regards", "best regards", "kind regards", "warm regards", "best", "cheers", "thanks",
    "thank you", "many thanks", "sincerely", "yours", "all the best", "abraços", "abraço",
    "um abraço", "obrigado", "obrigada", "atenciosamente", "cumprimentos", "saudações",
    "saludos", "un saludo", "gracias", "muchas gracias", "atentamente", "cordialmente",
    "cordialement", "merci", "bien à vous", "amicalement", "bonne journée", "bises", "à bientôt",
];

const CODE_SYMBOLS: &str = "{}[]();=<>";
const EXTRA_PUNCT: &str = "¿¡«»…\u{2013}\u{2014}“”‘’";

fn capped(count: usize, cap: usize) -> f64 {
    count.min(cap) as f64 / cap as f64
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Number of leading `>` markers, skipping spaces between them.
pub fn quote_depth(line: &str) -> usize {
    line.chars()
        .take_while(|&c| c == '>' || c == ' ')
        .filter(|&c| c == '>')
        .count()
}

/// `^[-_=*.]{3,}\s*$`
pub fn is_separator(line: &str) -> bool {
    let body = line.trim_end();
    body.chars().count() >= 3 && body.chars().all(|c| "-_=*.".contains(c))
}

fn starts_with_word(text: &str, lexicon: &[&str]) -> bool {
    lexicon.iter().any(|w| {
        text.strip_prefix(w)
            .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphanumeric()))
    })
}

/// Feature vector of one line, in the order of [`FEATURE_NAMES`].
pub fn feature_vector(line: &str) -> Vec<f64> {
    let n_chars = line.chars().count();
    let frac = |pred: &dyn Fn(char) -> bool| {
        if n_chars == 0 {
            0.0
        } else {
            line.chars().filter(|&c| pred(c)).count() as f64 / n_chars as f64
        }
    };
    let lowered = line.trim().to_lowercase();

    let mut v = vec![0.0; FEATURE_DIM];
    v[index::QUOTE_DEPTH] = capped(quote_depth(line), QUOTE_DEPTH_CAP);
    v[index::IS_EMPTY] = flag(line.is_empty());
    v[index::SIG_DELIMITER] = flag(line == "--" || line == "-- ");
    v[index::SEPARATOR] = flag(is_separator(line));
    v[index::LEADING_WS] = capped(
        line.chars().take_while(|c| c.is_whitespace()).count(),
        LEADING_WS_CAP,
    );
    v[index::LENGTH] = capped(n_chars, LENGTH_CAP);
    v[index::DIGIT_FRAC] = frac(&|c| c.is_numeric());
    v[index::PUNCT_FRAC] = frac(&|c| c.is_ascii_punctuation() || EXTRA_PUNCT.contains(c));
    v[index::UPPER_FRAC] = frac(&|c| c.is_uppercase());
    v[index::HAS_AT] = flag(line.contains('@'));
    v[index::HAS_URL] = flag(line.contains("://"));
    v[index::ENDS_WITH_COLON] = flag(line.trim_end().ends_with(':'));
    v[index::GREETING] = flag(starts_with_word(&lowered, GREETINGS));
    v[index::CLOSING] = flag(starts_with_word(&lowered, CLOSINGS));
    v[index::CODE_FRAC] = frac(&|c| CODE_SYMBOLS.contains(c));
    v[index::TABS] = capped(line.matches('\t').count(), TAB_CAP);
    v
}
