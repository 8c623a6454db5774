"""View-consistency metrics: depth unprojection, modified Chamfer, reprojection."""
