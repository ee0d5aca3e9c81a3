#pragma once

#include "datasens/classifier.hpp"
#include "datasens/corpus.hpp"
#include "datasens/embedding.hpp"
#include "datasens/error.hpp"
#include "datasens/experiments.hpp"
#include "datasens/homogeneity.hpp"
#include "datasens/metrics.hpp"
#include "datasens/perturb.hpp"
#include "datasens/random.hpp"
#include "datasens/run.hpp"
#include "datasens/synthetic.hpp"
