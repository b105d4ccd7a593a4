import os

# GMH_FULL_TESTS=1 runs the statistical checks at their full length
full_size = os.environ.get("GMH_FULL_TESTS", "0") not in ("", "0")


def scaled(full: int, quick: int) -> int:
    return full if full_size else quick
