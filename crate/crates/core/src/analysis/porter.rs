//! The original Porter (1980) suffix-stripping stemmer.
//!
//! Operates on lowercase ASCII words. Words of one or two letters are
//! returned unchanged. This is the algorithm as published, so step 2 maps
//! `abli` to `able` and has no `logi` rule (both differ in later C releases).

/// Stem a lowercase ASCII word. Callers are responsible for filtering out
/// anything else; non-`a..=z` bytes are treated as consonants.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 {
        return word.to_string();
    }
    let mut s = Stemmer {
        b: word.as_bytes().to_vec(),
    };
    s.step1ab();
    if s.b.len() >= 2 {
        s.step1c();
        s.step2();
        s.step3();
        s.step4();
        s.step5();
    }
    String::from_utf8(s.b).expect("stemmer only removes or writes ASCII")
}

struct Stemmer {
    b: Vec<u8>,
}

impl Stemmer {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `b[..len]`.
    fn measure(&self, len: usize) -> usize {
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        let mut m = 0;
        loop {
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i >= len {
                return m;
            }
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            m += 1;
            if i >= len {
                return m;
            }
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.b[len - 1] == self.b[len - 2] && self.is_consonant(len - 1)
    }

    /// `*o`: stem ends consonant-vowel-consonant, last consonant not w, x or y.
    fn ends_cvc(&self, len: usize) -> bool {
        if len < 3 {
            return false;
        }
        let i = len - 1;
        if !self.is_consonant(i) || self.is_consonant(i - 1) || !self.is_consonant(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        self.b.ends_with(suffix.as_bytes())
    }

    fn replace_suffix(&mut self, suffix_len: usize, replacement: &str) {
        let keep = self.b.len() - suffix_len;
        self.b.truncate(keep);
        self.b.extend_from_slice(replacement.as_bytes());
    }

    /// Apply the first rule whose suffix matches, if the remaining stem has
    /// measure greater than `min_measure`. Rule lists are ordered so the
    /// first match is the longest one.
    fn apply_rules(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        for &(suffix, replacement) in rules {
            if self.ends_with(suffix) {
                let stem_len = self.b.len() - suffix.len();
                if self.measure(stem_len) > min_measure {
                    self.replace_suffix(suffix.len(), replacement);
                }
                return;
            }
        }
    }

    fn step1ab(&mut self) {
        if self.ends_with("sses") {
            self.replace_suffix(4, "ss");
        } else if self.ends_with("ies") {
            self.replace_suffix(3, "i");
        } else if self.ends_with("ss") {
        } else if self.ends_with("s") {
            self.replace_suffix(1, "");
        }

        if self.ends_with("eed") {
            if self.measure(self.b.len() - 3) > 0 {
                self.replace_suffix(3, "ee");
            }
            return;
        }
        let removed = if self.ends_with("ed") && self.has_vowel(self.b.len() - 2) {
            self.replace_suffix(2, "");
            true
        } else if self.ends_with("ing") && self.has_vowel(self.b.len() - 3) {
            self.replace_suffix(3, "");
            true
        } else {
            false
        };
        if !removed {
            return;
        }
        let len = self.b.len();
        if self.ends_with("at") || self.ends_with("bl") || self.ends_with("iz") {
            self.b.push(b'e');
        } else if self.ends_double_consonant(len) && !matches!(self.b[len - 1], b'l' | b's' | b'z')
        {
            self.b.pop();
        } else if self.measure(len) == 1 && self.ends_cvc(len) {
            self.b.push(b'e');
        }
    }

    fn step1c(&mut self) {
        let len = self.b.len();
        if self.ends_with("y") && self.has_vowel(len - 1) {
            self.b[len - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        // "ization" must be tried before "ation", "ational" before "tional".
        let mut ordered: Vec<(&str, &str)> = RULES.to_vec();
        ordered.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
        self.apply_rules(&ordered, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ness", ""),
            ("ful", ""),
        ];
        self.apply_rules(RULES, 0);
    }

    fn step4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism", "ate", "iti",
            "ous", "ive", "ize", "ion", "al", "er", "ic", "ou",
        ];
        for &suffix in SUFFIXES {
            if !self.ends_with(suffix) {
                continue;
            }
            let stem_len = self.b.len() - suffix.len();
            if suffix == "ion" && !(stem_len > 0 && matches!(self.b[stem_len - 1], b's' | b't')) {
                continue;
            }
            if self.measure(stem_len) > 1 {
                self.b.truncate(stem_len);
            }
            return;
        }
    }

    fn step5(&mut self) {
        let len = self.b.len();
        if self.ends_with("e") {
            let m = self.measure(len - 1);
            if m > 1 || (m == 1 && !self.ends_cvc(len - 1)) {
                self.b.pop();
            }
        }
        let len = self.b.len();
        if self.b[len - 1] == b'l' && self.ends_double_consonant(len) && self.measure(len) > 1 {
            self.b.pop();
        }
    }
}
