"""Regenerates the PDF fixtures and prints their page counts as read by pypdf."""

import io
import zlib
from pathlib import Path

from pypdf import PdfReader, PdfWriter
from reportlab.pdfgen import canvas

HERE = Path(__file__).parent


def reportlab_pdf(pages, producer_note=""):
    buf = io.BytesIO()
    c = canvas.Canvas(buf, invariant=1)
    for i in range(pages):
        c.drawString(72, 720, f"fixture page {i + 1} {producer_note}")
        c.showPage()
    c.save()
    return buf.getvalue()


def classic(objects, root=1):
    """Serializes numbered object bodies with a classic xref table."""
    out = bytearray(b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n")
    offsets = []
    for i, body in enumerate(objects, start=1):
        offsets.append(len(out))
        out += f"{i} 0 obj\n".encode() + body + b"\nendobj\n"
    xref = len(out)
    out += f"xref\n0 {len(objects) + 1}\n0000000000 65535 f \n".encode()
    for off in offsets:
        out += f"{off:010d} 00000 n \n".encode()
    out += f"trailer\n<< /Size {len(objects) + 1} /Root {root} 0 R >>\nstartxref\n{xref}\n%%EOF\n".encode()
    return bytes(out)


def nested_tree():
    return classic([
        b"<< /Type /Catalog /Pages 2 0 R >>",
        b"<< /Type /Pages /Kids [3 0 R 6 0 R] /Count 3 >>",
        b"<< /Type /Pages /Parent 2 0 R /Kids [4 0 R 5 0 R] /Count 2 >>",
        b"<< /Type /Page /Parent 3 0 R /MediaBox [0 0 612 792] >>",
        b"<< /Type /Page /Parent 3 0 R /MediaBox [0 0 612 792] >>",
        b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>",
    ])


def xref_stream():
    """Catalog and page tree packed in an object stream, indexed by an xref stream."""
    packed = {
        2: b"<< /Type /Pages /Kids [3 0 R 4 0 R] /Count 2 >>",
        3: b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>",
        4: b"<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] >>",
    }
    header, body = b"", b""
    for num, obj in packed.items():
        header += f"{num} {len(body)} ".encode()
        body += obj + b" "
    objstm = header + body
    data = zlib.compress(objstm)

    out = bytearray(b"%PDF-1.5\n%\xe2\xe3\xcf\xd3\n")
    off1 = len(out)
    out += b"1 0 obj\n<< /Type /Catalog /Pages 2 0 R >>\nendobj\n"
    off5 = len(out)
    out += (f"5 0 obj\n<< /Type /ObjStm /N {len(packed)} /First {len(header)} "
            f"/Filter /FlateDecode /Length {len(data)} >>\nstream\n").encode()
    out += data + b"\nendstream\nendobj\n"
    off6 = len(out)
    rows = [(0, 0, 65535), (1, off1, 0)]
    rows += [(2, 5, i) for i in range(len(packed))]
    rows += [(1, off5, 0), (1, off6, 0)]
    raw = b"".join(t.to_bytes(1, "big") + a.to_bytes(4, "big") + b.to_bytes(2, "big") for t, a, b in rows)
    xdata = zlib.compress(raw)
    out += (f"6 0 obj\n<< /Type /XRef /Size 7 /W [1 4 2] /Root 1 0 R "
            f"/Filter /FlateDecode /Length {len(xdata)} >>\nstream\n").encode()
    out += xdata + b"\nendstream\nendobj\n"
    out += f"startxref\n{off6}\n%%EOF\n".encode()
    return bytes(out)


def encrypted():
    writer = PdfWriter(clone_from=io.BytesIO(reportlab_pdf(2)))
    writer.encrypt(user_password="", owner_password="owner", algorithm="RC4-128")
    buf = io.BytesIO()
    writer.write(buf)
    return buf.getvalue()


def broken_startxref():
    data = reportlab_pdf(4)
    at = data.rindex(b"startxref")
    return data[:at] + b"startxref\n999999\n%%EOF\n"


def main():
    fixtures = {
        "one_page.pdf": reportlab_pdf(1),
        "twelve_pages.pdf": reportlab_pdf(12),
        "nested_tree.pdf": nested_tree(),
        "xref_stream.pdf": xref_stream(),
        "encrypted.pdf": encrypted(),
        "broken_startxref.pdf": broken_startxref(),
        "not_a_pdf.pdf": b"<html><body>404 Not Found</body></html>\n",
    }
    for name, data in fixtures.items():
        (HERE / name).write_bytes(data)
        try:
            r = PdfReader(io.BytesIO(data), strict=False)
            info = "encrypted" if r.is_encrypted else f"{len(r.pages)} pages"
        except Exception as e:  # noqa: BLE001
            info = f"unreadable ({type(e).__name__})"
        print(f"{name}: {info}")


if __name__ == "__main__":
    main()
