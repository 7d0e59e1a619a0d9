#include "intentspan/encoder.hpp"

namespace intentspan {

Mat<double> mean_pool_subwords(const Mat<double>& subword_vectors,
                               const std::vector<std::vector<std::size_t>>& groups) {
  Mat<double> out(static_cast<Eigen::Index>(groups.size()), subword_vectors.cols());
  for (std::size_t t = 0; t < groups.size(); ++t) {
    if (groups[t].empty())
      throw AdapterError("subword pooling: token " + std::to_string(t) + " has no subwords");
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(subword_vectors.cols());
    for (std::size_t r : groups[t]) {
      if (r >= static_cast<std::size_t>(subword_vectors.rows()))
        throw AdapterError("subword pooling: row index out of range");
      acc += subword_vectors.row(static_cast<Eigen::Index>(r));
    }
    out.row(static_cast<Eigen::Index>(t)) = acc / double(groups[t].size());
  }
  return out;
}

namespace {

std::map<std::string, std::function<std::shared_ptr<TokenVectorProvider>()>>& registry() {
  static std::map<std::string, std::function<std::shared_ptr<TokenVectorProvider>()>> r;
  return r;
}

}  // namespace

void register_token_vector_provider(
    const std::string& name, std::function<std::shared_ptr<TokenVectorProvider>()> factory) {
  registry()[name] = std::move(factory);
}

bool has_token_vector_provider(const std::string& name) { return registry().count(name) > 0; }

std::shared_ptr<TokenVectorProvider> make_token_vector_provider(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end())
    throw CapabilityError("encoder adapter '" + name +
                          "' is not registered in this build; provide an implementation and "
                          "register it under that name");
  return it->second();
}

TokenEncoding<double> adapter_encode(const std::vector<std::string>& raw_tokens,
                                     const std::string& provider_name) {
  auto provider = make_token_vector_provider(provider_name);
  Mat<double> rows = provider->encode(raw_tokens);
  if (rows.rows() != static_cast<Eigen::Index>(raw_tokens.size()))
    throw AdapterError("encoder adapter '" + provider_name + "' returned " +
                       std::to_string(rows.rows()) + " rows for " +
                       std::to_string(raw_tokens.size()) + " tokens");
  if (rows.cols() != provider->dim())
    throw AdapterError("encoder adapter '" + provider_name + "' returned dimension " +
                       std::to_string(rows.cols()) + ", declared " +
                       std::to_string(provider->dim()));
  if (!rows.allFinite())
    throw AdapterError("encoder adapter '" + provider_name + "' returned non-finite values");
  TokenEncoding<double> out;
  out.vectors = std::move(rows);
  out.mask.assign(raw_tokens.size(), true);
  return out;
}

}  // namespace intentspan
