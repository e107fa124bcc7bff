#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace perifem {

// Periodic interval [0, L). Vertices and elements are both numbered 0..ne-1;
// element e spans [x_e, x_e + width_e) and its right vertex is (e+1) mod ne.
struct Mesh1D {
  double length = 0.0;
  std::vector<double> vertex_x;
  std::vector<double> widths;

  int n_elements() const { return static_cast<int>(widths.size()); }
  int n_vertices() const { return n_elements(); }

  int left_vertex(int e) const { return e; }
  int right_vertex(int e) const { return (e + 1) % n_elements(); }
};

inline Mesh1D build_interval_mesh(double length, int ne) {
  if (length <= 0.0)
    throw std::invalid_argument("build_interval_mesh: length must be positive");
  if (ne < 1)
    throw std::invalid_argument("build_interval_mesh: ne must be >= 1");
  Mesh1D mesh;
  mesh.length = length;
  mesh.widths.assign(ne, length / ne);
  mesh.vertex_x.resize(ne);
  for (int i = 0; i < ne; ++i)
    mesh.vertex_x[i] = i * (length / ne);
  return mesh;
}

inline Mesh1D build_interval_mesh(const std::vector<double>& widths) {
  if (widths.empty())
    throw std::invalid_argument("build_interval_mesh: empty width list");
  for (double w : widths)
    if (w <= 0.0)
      throw std::invalid_argument("build_interval_mesh: widths must be positive");
  Mesh1D mesh;
  mesh.widths = widths;
  mesh.length = std::accumulate(widths.begin(), widths.end(), 0.0);
  mesh.vertex_x.resize(widths.size());
  double x = 0.0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    mesh.vertex_x[i] = x;
    x += widths[i];
  }
  return mesh;
}

// Doubly periodic uniform quad mesh on [0, Lx) x [0, Ly).
//
// Numbering (all row-major in i, then j):
//   vertices v(i,j) = j*nx + i at (i*dx, j*dy)
//   cells    c(i,j) = j*nx + i covering [i*dx,(i+1)dx] x [j*dy,(j+1)dy]
//   edges: vertical edges first (global normal +x), then horizontal (+y);
//     vertical   e(i,j) = j*nx + i        at x = i*dx, y in [j*dy,(j+1)dy]
//     horizontal e(i,j) = nx*ny + j*nx+i  at y = j*dy, x in [i*dx,(i+1)dx]
//
// cell_edges lists [left, right, bottom, top]; cell_edge_signs is +1 where
// the outward normal of the cell agrees with the global edge normal.
struct Mesh2D {
  int nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;
  double dx = 0.0, dy = 0.0;

  int n_cells() const { return nx * ny; }
  int n_vertices() const { return nx * ny; }
  int n_edges() const { return 2 * nx * ny; }

  int vertex(int i, int j) const { return wrap_j(j) * nx + wrap_i(i); }
  int cell(int i, int j) const { return wrap_j(j) * nx + wrap_i(i); }
  int vedge(int i, int j) const { return wrap_j(j) * nx + wrap_i(i); }
  int hedge(int i, int j) const { return nx * ny + wrap_j(j) * nx + wrap_i(i); }

  bool is_vertical_edge(int e) const { return e < nx * ny; }

  int cell_i(int c) const { return c % nx; }
  int cell_j(int c) const { return c / nx; }

  std::array<int, 4> cell_vertices(int c) const {
    int i = cell_i(c), j = cell_j(c);
    return {vertex(i, j), vertex(i + 1, j), vertex(i, j + 1), vertex(i + 1, j + 1)};
  }

  std::array<int, 4> cell_edges(int c) const {
    int i = cell_i(c), j = cell_j(c);
    return {vedge(i, j), vedge(i + 1, j), hedge(i, j), hedge(i, j + 1)};
  }

  static std::array<int, 4> cell_edge_signs() { return {-1, +1, -1, +1}; }

  double cell_x0(int c) const { return cell_i(c) * dx; }
  double cell_y0(int c) const { return cell_j(c) * dy; }

 private:
  int wrap_i(int i) const { return (i % nx + nx) % nx; }
  int wrap_j(int j) const { return (j % ny + ny) % ny; }
};

inline Mesh2D build_periodic_quad_mesh(double lx, double ly, int nx, int ny) {
  if (lx <= 0.0 || ly <= 0.0)
    throw std::invalid_argument("build_periodic_quad_mesh: lengths must be positive");
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_periodic_quad_mesh: nx, ny must be >= 1");
  Mesh2D mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.lx = lx;
  mesh.ly = ly;
  mesh.dx = lx / nx;
  mesh.dy = ly / ny;
  return mesh;
}

} // namespace perifem
