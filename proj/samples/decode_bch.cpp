// Decodes noisy BCH(63,36) frames with plain BP and with all-ones weighted
// BP, and prints the frame error rate of both at a few SNRs.

#include <cstdio>

#include "activedec/bp.hpp"
#include "activedec/channel.hpp"
#include "activedec/code.hpp"
#include "activedec/eval.hpp"
#include "activedec/wbp.hpp"

int main() {
  using namespace activedec;
  const auto code = load_code(ACTIVEDEC_DATA_DIR "/codes/bch_63_36.alist", MatrixFormat::kAlist, "bch_63_36", 2);
  DecoderConfig cfg;
  const auto w = init_weights(code, cfg.tau);

  const double snrs[] = {3.0, 4.0, 5.0};
  StopRule stop;
  stop.min_errors = 50;
  stop.max_frames = 20000;

  const auto bp = monte_carlo([&](const LlrWord& z) { return bp_decode(code, z, cfg); }, code, snrs, stop, Rng(7));
  const auto wbp =
      monte_carlo([&](const LlrWord& z) { return wbp_decode(w, code, z, cfg); }, code, snrs, stop, Rng(7));
  std::printf("snr_db  bp_fer    wbp_fer   avg_iter\n");
  for (std::size_t i = 0; i < bp.points.size(); ++i)
    std::printf("%6.1f  %.6f  %.6f  %.3f\n", bp.points[i].snr_db, bp.points[i].fer, wbp.points[i].fer,
                bp.points[i].avg_iterations);
}
