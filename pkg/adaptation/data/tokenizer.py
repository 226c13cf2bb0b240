import re
from typing import List

URL_TOKEN = '<url>'

URL_PATTERN = re.compile(r'(?:https?://|www\.)\S+', re.IGNORECASE)
TOKEN_PATTERN = re.compile(r"<url>|[#@]\w+|\w+(?:'\w+)?|[^\w\s]")


def tokenize(text: str) -> List[str]:
    """
    Lowercase tweet tokenizer.

    Hashtags and mentions stay whole and URLs collapse to ``<url>``.
    Contractions are single tokens (``don't``, ``it's``), never split into
    ``do`` + ``n't``; silver labelers and embedding lookups see them that way.
    """
    text = URL_PATTERN.sub(f' {URL_TOKEN} ', text or '')
    return TOKEN_PATTERN.findall(text.lower())
