"""Hand-computed loss values (exact rationals)."""

from fractions import Fraction as F

from ansatzforge.search import Metrics

# (metrics, expected L)
CASES = [
    (Metrics(F(0), F(1), 10, 20, 4, F("0.1")), F(0)),
    # 5 + 16 + 3.2 + 3 + 9 + 2
    (Metrics(F("0.5"), F("0.9"), 20, 50, 6, F("0.3")), F("38.2")),
    # top stability tier only; F and D exactly at their thresholds
    (Metrics(F(0), F("0.95"), 16, 40, 4, F("0.6")), F(5)),
    # sigma on the upper edge stays in the middle tier
    (Metrics(F(0), F(1), 0, 0, 1, F("0.5")), F(2)),
    # below both caps: 0.25 + 2.25
    (Metrics(F(0), F(1), 0, 0, 0, F(0), F("0.98"), F("0.93")), F("2.5")),
    # both capped at 45
    (Metrics(F(0), F(1), 0, 0, 0, F(0), F("0.8"), F("0.5")), F(90)),
    # negative energy error clips; 1296 + 11.2 + 18 + 2
    (Metrics(F("-0.001"), F("0.5"), 30, 100, 3, F("0.25")), F("1327.2")),
    # 42.25 stays under the cap, 36 as well
    (Metrics(F(0), F(1), 0, 0, 0, F(0), F("0.86"), F("0.90")), F("78.25")),
    # sigma on the lower edge scores zero; 0.123 + 0.64 + 0.8 + 0.3 + 2.25
    (Metrics(F("0.0123"), F("0.94"), 17, 41, 5, F("0.2"), F(1), F("0.95")), F("4.113")),
    # 20 + 400 + 6.4 + 9.6 + 36 + 5 + 20.25 + 45 (F4 capped, F2 not)
    (Metrics(F(2), F("0.7"), 24, 72, 8, F(1), F("0.9"), F("0.8")), F("542.25")),
]
