//! Porter stemmer (the 1980 algorithm, steps 1a through 5b), matching the
//! reference implementation's behavior: words of length 1 or 2 are left
//! unchanged, step 2 uses `bli -> ble`, and step 2 includes `logi -> log`.
//!
//! Input is expected to be lowercase ASCII letters; anything else is
//! returned unchanged.

/// Stems one lowercase word.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = Stemmer {
        b: word.as_bytes().to_vec(),
    };
    w.step1ab();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    String::from_utf8(w.b).expect("stemmer operates on ASCII")
}

struct Stemmer {
    b: Vec<u8>,
}

impl Stemmer {
    /// True when b[i] is a consonant. `y` counts as a consonant at the
    /// start of the word or after a vowel.
    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => {
                if i == 0 {
                    true
                } else {
                    !self.cons(i - 1)
                }
            }
            _ => true,
        }
    }

    /// The measure m of b[0..len]: the word form is [C](VC)^m[V].
    fn measure(&self, len: usize) -> usize {
        let mut i = 0;
        // skip initial consonant run
        while i < len && self.cons(i) {
            i += 1;
        }
        let mut m = 0;
        loop {
            // vowel run
            while i < len && !self.cons(i) {
                i += 1;
            }
            if i >= len {
                return m;
            }
            // consonant run
            while i < len && self.cons(i) {
                i += 1;
            }
            m += 1;
            if i >= len {
                return m;
            }
        }
    }

    /// True when b[0..len] contains a vowel.
    fn vowel_in_stem(&self, len: usize) -> bool {
        (0..len).any(|i| !self.cons(i))
    }

    /// True when b[i-1] == b[i] and both are consonants.
    fn double_cons(&self, i: usize) -> bool {
        i >= 1 && self.b[i] == self.b[i - 1] && self.cons(i)
    }

    /// True when b[i-2..=i] is consonant-vowel-consonant and the final
    /// consonant is not w, x, or y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.cons(i) || self.cons(i - 1) || !self.cons(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        self.b.len() >= suffix.len() && self.b.ends_with(suffix.as_bytes())
    }

    /// Stem length once `suffix` is removed.
    fn stem_len(&self, suffix: &str) -> usize {
        self.b.len() - suffix.len()
    }

    fn truncate(&mut self, len: usize) {
        self.b.truncate(len);
    }

    fn replace_suffix(&mut self, suffix: &str, replacement: &str) {
        let keep = self.stem_len(suffix);
        self.b.truncate(keep);
        self.b.extend_from_slice(replacement.as_bytes());
    }

    /// Plurals and -ed / -ing.
    fn step1ab(&mut self) {
        if self.b.last() == Some(&b's') {
            if self.ends_with("sses") {
                self.truncate(self.b.len() - 2);
            } else if self.ends_with("ies") {
                self.replace_suffix("ies", "i");
            } else if self.b.len() >= 2 && self.b[self.b.len() - 2] != b's' {
                self.truncate(self.b.len() - 1);
            }
        }
        if self.ends_with("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.truncate(self.b.len() - 1);
            }
        } else {
            let stripped = if self.ends_with("ed") && self.vowel_in_stem(self.stem_len("ed")) {
                self.truncate(self.stem_len("ed"));
                true
            } else if self.ends_with("ing") && self.vowel_in_stem(self.stem_len("ing")) {
                self.truncate(self.stem_len("ing"));
                true
            } else {
                false
            };
            if stripped {
                if self.b.ends_with(b"at") || self.b.ends_with(b"bl") || self.b.ends_with(b"iz") {
                    self.b.push(b'e');
                } else if self.double_cons(self.b.len() - 1) {
                    if !matches!(self.b[self.b.len() - 1], b'l' | b's' | b'z') {
                        self.truncate(self.b.len() - 1);
                    }
                } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len() - 1) {
                    self.b.push(b'e');
                }
            }
        }
    }

    /// Terminal y to i when the stem has a vowel.
    fn step1c(&mut self) {
        if self.b.last() == Some(&b'y') && self.vowel_in_stem(self.b.len() - 1) {
            let last = self.b.len() - 1;
            self.b[last] = b'i';
        }
    }

    /// Applies the first rule whose suffix matches; the replacement
    /// happens only when the remaining stem has m > 0.
    fn apply_rules(&mut self, rules: &[(&str, &str)]) {
        for (suffix, replacement) in rules {
            if self.ends_with(suffix) {
                if self.measure(self.stem_len(suffix)) > 0 {
                    self.replace_suffix(suffix, replacement);
                }
                return;
            }
        }
    }

    fn step2(&mut self) {
        self.apply_rules(&[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("bli", "ble"),
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
            ("logi", "log"),
        ]);
    }

    fn step3(&mut self) {
        self.apply_rules(&[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ]);
    }

    fn step4(&mut self) {
        const SUFFIXES: [&str; 19] = [
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        for suffix in SUFFIXES {
            if self.ends_with(suffix) {
                let stem = self.stem_len(suffix);
                let applies = if suffix == "ion" {
                    stem >= 1 && matches!(self.b[stem - 1], b's' | b't')
                } else {
                    true
                };
                if applies && self.measure(stem) > 1 {
                    self.truncate(stem);
                }
                return;
            }
        }
    }

    /// 5a: drop final e when m > 1, or when m == 1 and the stem is not
    /// cvc. 5b: -ll to -l when m > 1.
    fn step5(&mut self) {
        if self.b.last() == Some(&b'e') {
            let stem = self.b.len() - 1;
            // A trailing vowel never adds a VC pair, so measuring the
            // whole word equals measuring the stem.
            let m = self.measure(self.b.len());
            let stem_is_cvc = stem >= 1 && self.cvc(stem - 1);
            if m > 1 || (m == 1 && !stem_is_cvc) {
                self.truncate(stem);
            }
        }
        if self.b.last() == Some(&b'l')
            && self.double_cons(self.b.len() - 1)
            && self.measure(self.b.len()) > 1
        {
            self.truncate(self.b.len() - 1);
        }
    }
}
