//! Text normalization shared by question lookup, answer passthrough and
//! answer comparison.

/// Lowercase, trim and collapse runs of whitespace into a single space.
pub fn collapse(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized form used as the question-bank key.
///
/// On top of [`collapse`], trailing punctuation is stripped, except `?`.
pub fn normalize_question(text: &str) -> String {
    let collapsed = collapse(text);
    let trimmed = collapsed.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '?');
    trimmed.trim_end().to_string()
}

const DIGIT_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

/// Map a whole-string digit word ("zero" … "ten") to its numeral.
pub fn digit_word_to_numeral(text: &str) -> Option<&'static str> {
    const NUMERALS: [&str; 11] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10"];
    DIGIT_WORDS
        .iter()
        .position(|w| *w == text)
        .map(|i| NUMERALS[i])
}

/// Normalize a raw generated answer.
///
/// `counting` enables the digit-word mapping, which only applies to answers
/// of open (counting) questions.
pub fn normalize_answer(text: &str, counting: bool) -> String {
    let collapsed = collapse(text);
    if counting {
        if let Some(numeral) = digit_word_to_numeral(&collapsed) {
            return numeral.to_string();
        }
    }
    collapsed
}

/// True when the normalized text is a non-negative integer literal or a digit word.
pub fn is_numeric(text: &str) -> bool {
    let t = collapse(text);
    (!t.is_empty() && t.chars().all(|c| c.is_ascii_digit())) || digit_word_to_numeral(&t).is_some()
}
