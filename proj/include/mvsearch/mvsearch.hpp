#ifndef MVSEARCH_MVSEARCH_HPP
#define MVSEARCH_MVSEARCH_HPP

// Umbrella header. http_service.hpp is left out so that users who do not
// serve over HTTP do not pull in cpp-httplib.

#include "mvsearch/bench.hpp"
#include "mvsearch/descriptor_io.hpp"
#include "mvsearch/eval.hpp"
#include "mvsearch/features.hpp"
#include "mvsearch/fusion.hpp"
#include "mvsearch/image.hpp"
#include "mvsearch/index.hpp"
#include "mvsearch/kmeans.hpp"
#include "mvsearch/manifest.hpp"
#include "mvsearch/session.hpp"
#include "mvsearch/similarity.hpp"
#include "mvsearch/vocabulary.hpp"

#endif  // MVSEARCH_MVSEARCH_HPP
