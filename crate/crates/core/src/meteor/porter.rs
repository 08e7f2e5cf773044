//! The original Porter (1980) suffix-stripping stemmer.
//!
//! Within each step only the rule with the longest matching suffix is
//! considered; if its condition fails the step leaves the word alone.

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

    /// Measure m of the first `len` letters: the number of VC sequences.
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

    /// *o: stem ends consonant-vowel-consonant, last consonant not w, x or y.
    fn ends_cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.b[len - 1], 'w' | 'x' | 'y')
    }

    fn ends_with(&self, suffix: &str) -> bool {
        let n = suffix.chars().count();
        n <= self.b.len()
            && self.b[self.b.len() - n..]
                .iter()
                .copied()
                .eq(suffix.chars())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.b.len() - suffix.chars().count()
    }

    fn replace_suffix(&mut self, suffix: &str, with: &str) {
        let keep = self.stem_len(suffix);
        self.b.truncate(keep);
        self.b.extend(with.chars());
    }

    fn last(&self) -> Option<char> {
        self.b.last().copied()
    }

    /// Longest matching rule from `rules` wins; returns whether it fired.
    fn apply_longest(
        &mut self,
        rules: &[(&str, &str)],
        cond: impl Fn(&Word, usize) -> bool,
    ) -> bool {
        let best = rules
            .iter()
            .filter(|(suffix, _)| self.ends_with(suffix))
            .max_by_key(|(suffix, _)| suffix.len());
        match best {
            Some(&(suffix, with)) if cond(self, self.stem_len(suffix)) => {
                self.replace_suffix(suffix, with);
                true
            }
            _ => false,
        }
    }

    fn step1a(&mut self) {
        self.apply_longest(
            &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")],
            |_, _| true,
        );
    }

    fn step1b(&mut self) {
        if self.ends_with("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.replace_suffix("eed", "ee");
            }
            return;
        }
        let fired = ["ed", "ing"].iter().any(|suffix| {
            if self.ends_with(suffix) && self.has_vowel(self.stem_len(suffix)) {
                self.replace_suffix(suffix, "");
                true
            } else {
                false
            }
        });
        if !fired {
            return;
        }
        if self.ends_with("at") || self.ends_with("bl") || self.ends_with("iz") {
            self.b.push('e');
        } else if self.ends_double_consonant(self.b.len())
            && !matches!(self.last(), Some('l' | 's' | 'z'))
        {
            self.b.pop();
        } else if self.measure(self.b.len()) == 1 && self.ends_cvc(self.b.len()) {
            self.b.push('e');
        }
    }

    fn step1c(&mut self) {
        if self.ends_with("y") && self.has_vowel(self.b.len() - 1) {
            self.replace_suffix("y", "i");
        }
    }

    fn step2(&mut self) {
        self.apply_longest(
            &[
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
            ],
            |w, len| w.measure(len) > 0,
        );
    }

    fn step3(&mut self) {
        self.apply_longest(
            &[
                ("icate", "ic"),
                ("ative", ""),
                ("alize", "al"),
                ("iciti", "ic"),
                ("ical", "ic"),
                ("ful", ""),
                ("ness", ""),
            ],
            |w, len| w.measure(len) > 0,
        );
    }

    fn step4(&mut self) {
        const SUFFIXES: [&str; 19] = [
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
            "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        let rules: Vec<(&str, &str)> = SUFFIXES.iter().map(|s| (*s, "")).collect();
        let ion_ok = |w: &Word, len: usize| len > 0 && matches!(w.b[len - 1], 's' | 't');
        self.apply_longest(&rules, |w, len| {
            let is_ion = w.b.len() - len == 3 && w.ends_with("ion");
            w.measure(len) > 1 && (!is_ion || ion_ok(w, len))
        });
    }

    fn step5(&mut self) {
        if self.ends_with("e") {
            let len = self.b.len() - 1;
            let m = self.measure(len);
            if m > 1 || (m == 1 && !self.ends_cvc(len)) {
                self.b.pop();
            }
        }
        if self.last() == Some('l')
            && self.ends_double_consonant(self.b.len())
            && self.measure(self.b.len()) > 1
        {
            self.b.pop();
        }
    }
}

/// Stem a lowercase token.
pub fn porter_stem(word: &str) -> String {
    let mut w = Word {
        b: word.chars().collect(),
    };
    if w.b.is_empty() {
        return String::new();
    }
    w.step1a();
    if w.b.is_empty() {
        return String::new();
    }
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    w.b.into_iter().collect()
}
