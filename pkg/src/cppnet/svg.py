"""Minimal deterministic SVG document builder.

Hand-rolled rather than delegated to a plotting library so identical
inputs always produce identical bytes (plotting backends embed run-
dependent ids and metadata).
"""


def _fmt(value) -> str:
    return f"{float(value):.3f}".rstrip("0").rstrip(".")


class SvgDocument:
    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self.elements: list[str] = []

    def rect(self, x, y, w, h, fill, cls=None, stroke=None, stroke_width=None):
        attrs = [
            f'x="{_fmt(x)}"',
            f'y="{_fmt(y)}"',
            f'width="{_fmt(w)}"',
            f'height="{_fmt(h)}"',
            f'fill="{fill}"',
        ]
        if cls:
            attrs.insert(0, f'class="{cls}"')
        if stroke:
            attrs.append(f'stroke="{stroke}"')
        if stroke_width is not None:
            attrs.append(f'stroke-width="{_fmt(stroke_width)}"')
        self.elements.append(f"<rect {' '.join(attrs)}/>")

    def line(self, x1, y1, x2, y2, stroke, width=1.0, cls=None):
        attrs = [
            f'x1="{_fmt(x1)}"',
            f'y1="{_fmt(y1)}"',
            f'x2="{_fmt(x2)}"',
            f'y2="{_fmt(y2)}"',
            f'stroke="{stroke}"',
            f'stroke-width="{_fmt(width)}"',
        ]
        if cls:
            attrs.insert(0, f'class="{cls}"')
        self.elements.append(f"<line {' '.join(attrs)}/>")

    def polyline(self, points, stroke, width=1.0, cls=None):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        cls_attr = f'class="{cls}" ' if cls else ""
        self.elements.append(
            f'<polyline {cls_attr}points="{pts}" fill="none" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}" '
            f'stroke-linejoin="round" stroke-linecap="round"/>'
        )

    def circle(self, cx, cy, r, fill, cls=None):
        cls_attr = f'class="{cls}" ' if cls else ""
        self.elements.append(
            f'<circle {cls_attr}cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{fill}"/>'
        )

    def text(self, x, y, content, size=12, anchor="middle", fill="#000"):
        self.elements.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{_fmt(size)}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{fill}">{content}</text>'
        )

    def to_string(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" '
            f'viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
        )
        return head + "\n".join(self.elements) + "\n</svg>\n"
