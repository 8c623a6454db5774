"""SDF grids, marching cubes, subdivision, vertex noise and mesh files."""
