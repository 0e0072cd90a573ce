//! The original (1980) Porter suffix-stripping stemmer.
//!
//! Rule sets are applied longest-suffix-first; when the longest matching
//! suffix fails its condition, no shorter suffix in the same set is tried.
//! Words of one or two letters are returned unchanged.

struct Word {
    b: Vec<char>,
}

impl Word {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            'a' | 'e' | 'i' | 'o' | 'u' => false,
            'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `b[..len]`.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
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
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    fn ends_double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.b[len - 1] == self.b[len - 2] && self.is_consonant(len - 1)
    }

    /// consonant-vowel-consonant ending, last consonant not w, x or y.
    fn ends_cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.b[len - 1], 'w' | 'x' | 'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.b.len() && self.b[self.b.len() - n..].iter().copied().eq(suffix.chars())
    }

    fn replace_suffix(&mut self, suffix_len: usize, with: &str) {
        let keep = self.b.len() - suffix_len;
        self.b.truncate(keep);
        self.b.extend(with.chars());
    }

    /// Finds the longest rule suffix the word ends with and, if `cond` holds
    /// for the remaining stem, rewrites it. Returns whether a suffix matched
    /// and the rewrite happened.
    fn apply_longest(&mut self, rules: &[(&str, &str)], cond: impl Fn(&Word, usize, &str) -> bool) -> bool {
        let hit = rules
            .iter()
            .filter(|(suffix, _)| self.ends_with(suffix))
            .max_by_key(|(suffix, _)| suffix.len());
        let Some(&(suffix, repl)) = hit else {
            return false;
        };
        let n = suffix.chars().count();
        let stem_len = self.b.len() - n;
        if cond(self, stem_len, suffix) {
            self.replace_suffix(n, repl);
            true
        } else {
            false
        }
    }

    fn step1a(&mut self) {
        self.apply_longest(&[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")], |_, _, _| true);
    }

    fn step1b(&mut self) {
        let mut second_or_third = false;
        if self.ends_with("eed") {
            let stem = self.b.len() - 3;
            if self.measure(stem) > 0 {
                self.replace_suffix(3, "ee");
            }
        } else if self.ends_with("ed") {
            let stem = self.b.len() - 2;
            if self.has_vowel(stem) {
                self.b.truncate(stem);
                second_or_third = true;
            }
        } else if self.ends_with("ing") {
            let stem = self.b.len() - 3;
            if self.has_vowel(stem) {
                self.b.truncate(stem);
                second_or_third = true;
            }
        }
        if !second_or_third {
            return;
        }
        if self.ends_with("at") || self.ends_with("bl") || self.ends_with("iz") {
            self.b.push('e');
        } else if self.ends_double_consonant(self.b.len()) && !matches!(self.b[self.b.len() - 1], 'l' | 's' | 'z') {
            self.b.pop();
        } else if self.measure(self.b.len()) == 1 && self.ends_cvc(self.b.len()) {
            self.b.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel(self.b.len() - 1) {
            let last = self.b.len() - 1;
            self.b[last] = 'i';
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
        self.apply_longest(RULES, |w, stem, _| w.measure(stem) > 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        self.apply_longest(RULES, |w, stem, _| w.measure(stem) > 0);
    }

    fn step4(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("al", ""),
            ("ance", ""),
            ("ence", ""),
            ("er", ""),
            ("ic", ""),
            ("able", ""),
            ("ible", ""),
            ("ant", ""),
            ("ement", ""),
            ("ment", ""),
            ("ent", ""),
            ("ion", ""),
            ("ou", ""),
            ("ism", ""),
            ("ate", ""),
            ("iti", ""),
            ("ous", ""),
            ("ive", ""),
            ("ize", ""),
        ];
        self.apply_longest(RULES, |w, stem, suffix| {
            w.measure(stem) > 1 && (suffix != "ion" || (stem > 0 && matches!(w.b[stem - 1], 's' | 't')))
        });
    }

    fn step5a(&mut self) {
        if self.ends_with("e") {
            let stem = self.b.len() - 1;
            let m = self.measure(stem);
            if m > 1 || (m == 1 && !self.ends_cvc(stem)) {
                self.b.truncate(stem);
            }
        }
    }

    fn step5b(&mut self) {
        let len = self.b.len();
        if self.measure(len) > 1 && self.ends_double_consonant(len) && self.b[len - 1] == 'l' {
            self.b.pop();
        }
    }
}

/// Stems a lowercase word. Characters outside a-z are treated as consonants.
pub fn stem(word: &str) -> String {
    let mut w = Word { b: word.chars().collect() };
    if w.b.len() <= 2 {
        return word.to_string();
    }
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    w.b.into_iter().collect()
}
