import logging

from django.template.loader import render_to_string

logger = logging.getLogger(__name__)

SVG_WIDTH = 512
SVG_TEMPLATE = 'carpets/approximation.svg'


def _coordinate(value):
    return f'{value:.10g}'


def render_svg(rects, width_px=SVG_WIDTH, fill='black'):
    """
    SVG text with one <rect> per rectangle, in generation order.

    The unit square maps onto a width_px square canvas with the y-axis pointing up.
    """
    if len(rects) == 0:
        raise ValueError("Cannot render an empty rectangle set")
    if width_px <= 0:
        raise ValueError(f"width_px must be positive, got {width_px}")

    scale = float(width_px)
    elements = [
        {
            'x': _coordinate(x * scale),
            'y': _coordinate((1.0 - y - h) * scale),
            'w': _coordinate(w * scale),
            'h': _coordinate(h * scale),
        }
        for x, y, w, h in zip(rects.x.tolist(), rects.y.tolist(), rects.w.tolist(), rects.h.tolist())
    ]
    logger.debug(f'Rendering {len(elements)} rectangles at {width_px}px')
    return render_to_string(SVG_TEMPLATE, {
        'width': width_px,
        'rects': elements,
        'fill': fill,
        'title': f'{rects.depth}-approximation, {len(elements)} rectangles',
    })
