"""Independent reference stemmer used only as a test oracle.

Written before (and independently of) the package implementation, as a
faithful transcription of the classic suffix-stripping reference program
(buffer/offset style, published rule set: abli->able, no logi rule, words
of length <= 2 untouched).
"""


class ReferenceStemmer:
    def __init__(self):
        self.b = ""  # working buffer, always exactly the current word
        self.k = -1  # index of last character
        self.j = -1  # offset set by ends()

    # -- predicates --

    def cons(self, i: int) -> bool:
        ch = self.b[i]
        if ch in "aeiou":
            return False
        if ch == "y":
            return True if i == 0 else not self.cons(i - 1)
        return True

    def m(self) -> int:
        """Number of VC sequences in b[0..j]."""
        n = 0
        i = 0
        while True:
            if i > self.j:
                return n
            if not self.cons(i):
                break
            i += 1
        i += 1
        while True:
            while True:
                if i > self.j:
                    return n
                if self.cons(i):
                    break
                i += 1
            i += 1
            n += 1
            while True:
                if i > self.j:
                    return n
                if not self.cons(i):
                    break
                i += 1
            i += 1

    def vowelinstem(self) -> bool:
        return any(not self.cons(i) for i in range(self.j + 1))

    def doublec(self, k: int) -> bool:
        if k < 1:
            return False
        if self.b[k] != self.b[k - 1]:
            return False
        return self.cons(k)

    def cvc(self, i: int) -> bool:
        if i < 2 or not self.cons(i) or self.cons(i - 1) or not self.cons(i - 2):
            return False
        return self.b[i] not in "wxy"

    # -- buffer editing --

    def ends(self, s: str) -> bool:
        length = len(s)
        if length > self.k + 1:
            return False
        if self.b[self.k - length + 1 : self.k + 1] != s:
            return False
        self.j = self.k - length
        return True

    def chop(self, n: int) -> None:
        self.k -= n
        self.b = self.b[: self.k + 1]

    def setto(self, s: str) -> None:
        self.b = self.b[: self.j + 1] + s
        self.k = len(self.b) - 1

    def r(self, s: str) -> None:
        if self.m() > 0:
            self.setto(s)

    # -- steps --

    def step1ab(self) -> None:
        if self.b[self.k] == "s":
            if self.ends("sses"):
                self.chop(2)
            elif self.ends("ies"):
                self.setto("i")
            elif self.b[self.k - 1] != "s":
                self.chop(1)
        if self.ends("eed"):
            if self.m() > 0:
                self.chop(1)
        elif (self.ends("ed") or self.ends("ing")) and self.vowelinstem():
            self.k = self.j
            self.b = self.b[: self.k + 1]
            if self.ends("at"):
                self.setto("ate")
            elif self.ends("bl"):
                self.setto("ble")
            elif self.ends("iz"):
                self.setto("ize")
            elif self.doublec(self.k):
                self.chop(1)
                if self.b[self.k] in "lsz":
                    self.b += self.b[self.k]
                    self.k += 1
            else:
                self.j = self.k
                if self.m() == 1 and self.cvc(self.k):
                    self.setto("e")

    def step1c(self) -> None:
        if self.ends("y") and self.vowelinstem():
            self.b = self.b[: self.k] + "i"

    def step2(self) -> None:
        if self.k < 1:
            return
        ch = self.b[self.k - 1]
        if ch == "a":
            if self.ends("ational"):
                self.r("ate")
            elif self.ends("tional"):
                self.r("tion")
        elif ch == "c":
            if self.ends("enci"):
                self.r("ence")
            elif self.ends("anci"):
                self.r("ance")
        elif ch == "e":
            if self.ends("izer"):
                self.r("ize")
        elif ch == "l":
            if self.ends("entli"):
                self.r("ent")
            elif self.ends("ousli"):
                self.r("ous")
            elif self.ends("abli"):
                self.r("able")
            elif self.ends("alli"):
                self.r("al")
            elif self.ends("eli"):
                self.r("e")
        elif ch == "o":
            if self.ends("ization"):
                self.r("ize")
            elif self.ends("ation"):
                self.r("ate")
            elif self.ends("ator"):
                self.r("ate")
        elif ch == "s":
            if self.ends("alism"):
                self.r("al")
            elif self.ends("iveness"):
                self.r("ive")
            elif self.ends("fulness"):
                self.r("ful")
            elif self.ends("ousness"):
                self.r("ous")
        elif ch == "t":
            if self.ends("aliti"):
                self.r("al")
            elif self.ends("iviti"):
                self.r("ive")
            elif self.ends("biliti"):
                self.r("ble")

    def step3(self) -> None:
        ch = self.b[self.k]
        if ch == "e":
            if self.ends("icate"):
                self.r("ic")
            elif self.ends("ative"):
                self.r("")
            elif self.ends("alize"):
                self.r("al")
        elif ch == "i":
            if self.ends("iciti"):
                self.r("ic")
        elif ch == "l":
            if self.ends("ical"):
                self.r("ic")
            elif self.ends("ful"):
                self.r("")
        elif ch == "s":
            if self.ends("ness"):
                self.r("")

    def step4(self) -> None:
        if self.k < 1:
            return
        ch = self.b[self.k - 1]
        matched = False
        if ch == "a":
            matched = self.ends("al")
        elif ch == "c":
            matched = self.ends("ance") or self.ends("ence")
        elif ch == "e":
            matched = self.ends("er")
        elif ch == "i":
            matched = self.ends("ic")
        elif ch == "l":
            matched = self.ends("able") or self.ends("ible")
        elif ch == "n":
            matched = (
                self.ends("ant")
                or self.ends("ement")
                or self.ends("ment")
                or self.ends("ent")
            )
        elif ch == "o":
            matched = (
                self.ends("ion") and self.j >= 0 and self.b[self.j] in "st"
            ) or self.ends("ou")
        elif ch == "s":
            matched = self.ends("ism")
        elif ch == "t":
            matched = self.ends("ate") or self.ends("iti")
        elif ch == "u":
            matched = self.ends("ous")
        elif ch == "v":
            matched = self.ends("ive")
        elif ch == "z":
            matched = self.ends("ize")
        if matched and self.m() > 1:
            self.k = self.j
            self.b = self.b[: self.k + 1]

    def step5(self) -> None:
        self.j = self.k
        if self.b[self.k] == "e":
            a = self.m()
            if a > 1 or (a == 1 and not self.cvc(self.k - 1)):
                self.chop(1)
        if self.b[self.k] == "l" and self.doublec(self.k):
            self.j = self.k
            if self.m() > 1:
                self.chop(1)

    def stem(self, word: str) -> str:
        if len(word) <= 2 or not word.isascii() or not word.isalpha() or not word.islower():
            return word
        self.b = word
        self.k = len(word) - 1
        self.j = 0
        self.step1ab()
        self.step1c()
        self.step2()
        self.step3()
        self.step4()
        self.step5()
        return self.b


def reference_stem(word: str) -> str:
    return ReferenceStemmer().stem(word)
