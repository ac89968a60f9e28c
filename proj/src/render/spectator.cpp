#include "detail.hpp"

namespace vg::render {

StereoFrame render_stereo(const Scene& scene) {
  return {render_view(scene, scene.rig.left), render_view(scene, scene.rig.right)};
}

Image8 composite_spectator(const Scene& scene, const Image8& background) {
  if (!scene.rig.pv) throw RenderError(RenderErrc::MissingView, "scene rig has no PV view");
  const View& pv = *scene.rig.pv;
  const int w = pv.width > 0 ? pv.width : scene.settings.width;
  const int h = pv.height > 0 ? pv.height : scene.settings.height;
  if (background.width != w || background.height != h || background.channels < 3) {
    throw RenderError(RenderErrc::ResolutionMismatch,
                      "background " + std::to_string(background.width) + "x" + std::to_string(background.height) +
                          " does not match PV view " + std::to_string(w) + "x" + std::to_string(h));
  }
  const Framebuffer holo = render_view(scene, pv);
  Image8 out(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& p = holo.at(x, y);
      const std::uint8_t* bg = background.px(x, y);
      std::uint8_t* o = out.px(x, y);
      const float rgb[3] = {p.r, p.g, p.b};
      for (int c = 0; c < 3; ++c) {
        const float v = rgb[c] * 255.0f + (1.0f - p.a) * float(bg[c]);
        o[c] = std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Image8 render_spectator_only(const Scene& scene, const Image8& background) {
  return composite_spectator(scene, background);
}

ThreeViewFrame render_three_views(const Scene& scene, const Image8& background) {
  ThreeViewFrame f;
  f.stereo = render_stereo(scene);
  f.spectator = composite_spectator(scene, background);
  return f;
}

}  // namespace vg::render
