"""Render the case-study legislation PDF from the fixture corpus.

Each corpus section is printed on the page the fixture assigns it, so
bill deep links (`aca.pdf#page=N`) land on the right text.
"""

import json
import sys
from pathlib import Path

from reportlab.lib.pagesizes import letter
from reportlab.lib.units import inch
from reportlab.pdfgen import canvas

root = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures/aca-case-study")
registry = json.loads((root / "registry.json").read_text())
corpus = json.loads((root / "corpus.json").read_text())
doc = registry["aca"]
by_page = {s["page"]: s for s in corpus}

out = root / "documents" / doc["uri"]
c = canvas.Canvas(str(out), pagesize=letter, invariant=1)
c.setTitle(doc["title"])
width, height = letter
for page in range(1, doc["page_count"] + 1):
    c.setFont("Helvetica", 9)
    c.drawString(inch, 0.6 * inch, f"{doc['title']} - page {page}")
    section = by_page.get(page)
    if section:
        c.setFont("Helvetica-Bold", 13)
        c.drawString(inch, height - inch, f"{section['section_id'].replace('SEC-', 'SEC. ')}. {section['title']}")
        c.setFont("Helvetica", 11)
        text = c.beginText(inch, height - 1.4 * inch)
        line = ""
        for word in section["text"].split():
            if len(line) + len(word) > 85:
                text.textLine(line)
                line = ""
            line = f"{line} {word}".strip()
        text.textLine(line)
        c.drawText(text)
    c.showPage()
c.save()
print(f"wrote {out}")
