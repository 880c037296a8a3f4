//! The Porter (1980) suffix-stripping stemmer, following the behaviour of
//! Martin Porter's reference C implementation (including its `bli -> ble`
//! and `logi -> log` step-2 rules).
//!
//! Words of two characters or fewer are returned unchanged.

pub fn stem(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= 2 {
        return word.to_string();
    }
    let mut s = Stemmer {
        b: chars,
        end: 0,
    };
    s.end = s.b.len();
    s.step1ab();
    if s.end > 1 {
        s.step1c();
        s.step2();
        s.step3();
        s.step4();
        s.step5();
    }
    s.b[..s.end].iter().collect()
}

struct Stemmer {
    b: Vec<char>,
    /// Exclusive end of the current word.
    end: usize,
}

impl Stemmer {
    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            'a' | 'e' | 'i' | 'o' | 'u' => false,
            'y' => i == 0 || !self.cons(i - 1),
            _ => true,
        }
    }

    /// Number of VC sequences in `b[..len]`.
    fn measure(&self, len: usize) -> usize {
        let mut i = 0;
        while i < len && self.cons(i) {
            i += 1;
        }
        let mut n = 0;
        loop {
            while i < len && !self.cons(i) {
                i += 1;
            }
            if i >= len {
                return n;
            }
            while i < len && self.cons(i) {
                i += 1;
            }
            n += 1;
            if i >= len {
                return n;
            }
        }
    }

    fn vowel_in(&self, len: usize) -> bool {
        (0..len).any(|i| !self.cons(i))
    }

    /// `b[i-1..=i]` is a double consonant.
    fn double_cons(&self, i: usize) -> bool {
        i >= 1 && self.b[i] == self.b[i - 1] && self.cons(i)
    }

    /// `b[i-2..=i]` is consonant-vowel-consonant and the last is not w, x or y.
    fn cvc(&self, i: usize) -> bool {
        if i < 2 || !self.cons(i) || self.cons(i - 1) || !self.cons(i - 2) {
            return false;
        }
        !matches!(self.b[i], 'w' | 'x' | 'y')
    }

    /// If the word ends with `suffix`, returns the length of the stem before it.
    fn ends(&self, suffix: &str) -> Option<usize> {
        let n = suffix.chars().count();
        if n > self.end {
            return None;
        }
        let start = self.end - n;
        self.b[start..self.end]
            .iter()
            .copied()
            .eq(suffix.chars())
            .then_some(start)
    }

    fn set_to(&mut self, stem_len: usize, replacement: &str) {
        self.b.truncate(stem_len);
        self.b.extend(replacement.chars());
        self.end = self.b.len();
    }

    /// First matching suffix in `rules` is replaced when the stem has m > 0.
    fn replace_first(&mut self, rules: &[(&str, &str)]) {
        for (suffix, replacement) in rules {
            if let Some(stem_len) = self.ends(suffix) {
                if self.measure(stem_len) > 0 {
                    self.set_to(stem_len, replacement);
                }
                return;
            }
        }
    }

    fn step1ab(&mut self) {
        if self.b[self.end - 1] == 's' {
            if let Some(j) = self.ends("sses") {
                self.set_to(j, "ss");
            } else if let Some(j) = self.ends("ies") {
                self.set_to(j, "i");
            } else if self.end >= 2 && self.b[self.end - 2] != 's' {
                self.end -= 1;
                self.b.truncate(self.end);
            }
        }
        if let Some(j) = self.ends("eed") {
            if self.measure(j) > 0 {
                self.end -= 1;
                self.b.truncate(self.end);
            }
            return;
        }
        let stem = self.ends("ed").or_else(|| self.ends("ing"));
        if let Some(j) = stem.filter(|&j| self.vowel_in(j)) {
            self.b.truncate(j);
            self.end = j;
            if let Some(j) = self.ends("at") {
                self.set_to(j, "ate");
            } else if let Some(j) = self.ends("bl") {
                self.set_to(j, "ble");
            } else if let Some(j) = self.ends("iz") {
                self.set_to(j, "ize");
            } else if self.double_cons(self.end - 1) {
                if !matches!(self.b[self.end - 1], 'l' | 's' | 'z') {
                    self.end -= 1;
                    self.b.truncate(self.end);
                }
            } else if self.measure(self.end) == 1 && self.cvc(self.end - 1) {
                self.set_to(self.end, "e");
            }
        }
    }

    fn step1c(&mut self) {
        if let Some(j) = self.ends("y") {
            if self.vowel_in(j) {
                self.b[j] = 'i';
            }
        }
    }

    fn step2(&mut self) {
        self.replace_first(&[
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
        self.replace_first(&[
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
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou",
            "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        for suffix in SUFFIXES {
            if let Some(j) = self.ends(suffix) {
                if suffix == "ion" && !(j > 0 && matches!(self.b[j - 1], 's' | 't')) {
                    continue;
                }
                if self.measure(j) > 1 {
                    self.b.truncate(j);
                    self.end = j;
                }
                return;
            }
        }
    }

    fn step5(&mut self) {
        let full = self.end;
        if self.b[self.end - 1] == 'e' {
            let m = self.measure(full);
            if m > 1 || (m == 1 && !self.cvc(self.end - 2)) {
                self.end -= 1;
                self.b.truncate(self.end);
            }
        }
        if self.b[self.end - 1] == 'l' && self.double_cons(self.end - 1) && self.measure(full) > 1 {
            self.end -= 1;
            self.b.truncate(self.end);
        }
    }
}
