from adaptation.data.synthetic import SyntheticSpec, gen_synthetic, write_synthetic
from adaptation.management.base import AdaptationCommand


class Command(AdaptationCommand):
    help = ('Generate labeled source, unlabeled target and gold target corpora with a controllable '
            'lexical shift, plus silver labels, word vectors and a ready-to-run run.cfg')

    def add_arguments(self, parser):
        defaults = SyntheticSpec()
        parser.add_argument('out_dir', help='Directory for the generated files')
        parser.add_argument('--n-source', type=int, default=defaults.n_source,
                            help=f'Source utterances (default: {defaults.n_source})')
        parser.add_argument('--n-target', type=int, default=defaults.n_target,
                            help=f'Target utterances (default: {defaults.n_target})')
        parser.add_argument('--shift', type=float, default=defaults.shift,
                            help=f'Fraction of target tokens replaced by domain synonyms (default: {defaults.shift})')
        parser.add_argument('--seed', type=int, default=defaults.seed, help=f'Generator seed (default: {defaults.seed})')
        parser.add_argument('--dim', type=int, default=defaults.d_e,
                            help=f'Word-vector dimension (default: {defaults.d_e})')

    def run(self, **options):
        spec = SyntheticSpec(
            n_source=options['n_source'],
            n_target=options['n_target'],
            shift=options['shift'],
            seed=options['seed'],
            d_e=options['dim'],
        )
        paths = write_synthetic(gen_synthetic(spec), options['out_dir'])
        self.write_records(['file', 'path'], sorted(paths.items()))
