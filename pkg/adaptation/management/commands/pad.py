from adaptation.engine.losses import SOURCE, TARGET
from adaptation.exceptions import ConfigurationError
from adaptation.management.base import AdaptationCommand
from adaptation.services.evaluation import (
    FEATURE_VIEWS, PAD_EPOCHS, PAD_FOLDS, PAD_LEARNING_RATE, FeatureDump, proxy_a_distance,
)


class Command(AdaptationCommand):
    help = ('Proxy A-distance between source and target features. With one dump its domain column '
            'separates the two sides; with two dumps every row of the first is source and every row '
            'of the second is target.')

    def add_arguments(self, parser):
        parser.add_argument('dumps', nargs='+', metavar='DUMP', help='One or two feature CSV files')
        parser.add_argument('--view', choices=FEATURE_VIEWS, default='dual', help='View name recorded in the result (default: dual)')
        parser.add_argument('--folds', type=int, default=PAD_FOLDS,
                            help=f'1 for one stratified 80/20 split, more to average k folds (default: {PAD_FOLDS})')
        parser.add_argument('--epochs', type=int, default=PAD_EPOCHS, help=f'Probe epochs (default: {PAD_EPOCHS})')
        parser.add_argument('--learning-rate', type=float, default=PAD_LEARNING_RATE,
                            help=f'Probe learning rate (default: {PAD_LEARNING_RATE})')
        parser.add_argument('--seed', type=int, default=0, help='Split shuffling and probe seed (default: 0)')
        parser.add_argument('--json', action='store_true', help='Print the estimate as one JSON object')

    def run(self, **options):
        dumps = options['dumps']
        if len(dumps) > 2:
            raise ConfigurationError("pad takes one or two feature dumps")
        if len(dumps) == 1:
            dump = FeatureDump.read_csv(dumps[0], view=options['view'])
            source, target = dump.for_domain(SOURCE), dump.for_domain(TARGET)
        else:
            source = FeatureDump.read_csv(dumps[0], view=options['view'])
            target = FeatureDump.read_csv(dumps[1], view=options['view'])
        estimate = proxy_a_distance(source, target, folds=options['folds'], seed=options['seed'],
                                    epochs=options['epochs'], learning_rate=options['learning_rate'])
        if options['json']:
            self.stdout.write(estimate.to_json())
        else:
            self.write_mapping(estimate.to_record())
