"""SDF-to-density conversion, ray sampling, compositing and image rendering."""
