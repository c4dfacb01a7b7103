// Finds how many single-step updates flip the reference model's next-token
// argmax from "Search" to "Go" on the steering context, and writes the count
// to the steering fixture file as the frozen regression bound k.
//
//   steering_probe --fixture data/steering/fixture.json [--write]

#include <cmath>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tta/adapt/adaptation.hpp"
#include "tta/errors.hpp"
#include "tta/lm/decode.hpp"
#include "tta/lm/model.hpp"
#include "tta/util.hpp"

namespace {

using namespace tta;

std::vector<double> probabilities(const lm::ModelWeights& w, std::vector<double> h, const adapt::AdaptationVector& delta) {
  for (std::size_t k = 0; k < h.size(); ++k) h[k] += delta.delta[k];
  auto z = lm::project(w, h);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) sum += (v = std::exp(v - m));
  for (auto& v : z) v /= sum;
  return z;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe the steering fixture"};
  std::filesystem::path fixture = data_dir() / "steering" / "fixture.json";
  bool write = false;
  int limit = 500;
  app.add_option("--fixture", fixture, "Steering fixture JSON")->check(CLI::ExistingFile);
  app.add_flag("--write", write, "Store the measured k in the fixture");
  app.add_option("--limit", limit, "Give up after this many updates");
  CLI11_PARSE(app, argc, argv);

  try {
    auto spec = nlohmann::json::parse(read_file(fixture));
    const auto base = fixture.parent_path();
    const auto weights = lm::load_model(base / spec.at("model").get<std::string>());
    const lm::Tokenizer tok(lm::Vocabulary::load(base / spec.at("vocab").get<std::string>()));
    const std::string context = spec.at("context").get<std::string>();
    const auto go = *tok.vocabulary().find(spec.at("in_context").get<std::string>());
    const auto search = *tok.vocabulary().find(spec.at("competitor").get<std::string>());

    std::vector<lm::TokenId> ids{lm::Vocabulary::kBos};
    for (auto id : tok.encode(context)) ids.push_back(id);
    if (std::find(ids.begin(), ids.end(), search) != ids.end()) throw tta::Error("context must not contain the competitor");

    lm::DecoderSession session(*weights);
    std::vector<double> h;
    for (auto id : ids) h = session.append(id);

    adapt::AdaptationConfig cfg;
    cfg.learning_rate = spec.at("learning_rate").get<double>();
    cfg.update_steps = 1;
    auto delta = adapt::AdaptationVector::zeros(weights->config.d);
    auto p = probabilities(*weights, h, delta);
    std::cout << "step 0: p(Go)=" << p[go] << " p(Search)=" << p[search] << " argmax=" << tok.decode_one(lm::argmax(p)) << "\n";
    if (lm::argmax(p) != search) throw tta::Error("base argmax is not the competitor; the planted prior is too weak");

    int k = 0;
    for (int step = 1; step <= limit; ++step) {
      delta = adapt::update(delta, cfg, *weights, ids).first;
      p = probabilities(*weights, h, delta);
      std::cout << "step " << step << ": p(Go)=" << p[go] << " p(Search)=" << p[search]
                << " argmax=" << tok.decode_one(lm::argmax(p)) << "\n";
      if (lm::argmax(p) == go) {
        k = step;
        break;
      }
    }
    if (k == 0) throw tta::Error("argmax did not flip within " + std::to_string(limit) + " updates");
    std::cout << "k=" << k << "\n";
    if (write) {
      spec["k"] = k;
      write_file(fixture, spec.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
