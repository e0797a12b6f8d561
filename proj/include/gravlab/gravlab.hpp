#ifndef GRAVLAB_GRAVLAB_HPP
#define GRAVLAB_GRAVLAB_HPP

#include "bayes.hpp"
#include "dynamics.hpp"
#include "error_model.hpp"
#include "experiments.hpp"
#include "expm.hpp"
#include "fisher.hpp"
#include "fock.hpp"
#include "haar.hpp"
#include "rng.hpp"

#endif
